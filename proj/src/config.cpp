#include "tke/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tke {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<PerturbationTerm> parse_perturbation(const std::string& value, int line_no) {
  std::vector<PerturbationTerm> terms;
  size_t pos = 0;
  while (true) {
    const size_t open = value.find('(', pos);
    if (open == std::string::npos) break;
    const std::string gap = trim(value.substr(pos, open - pos));
    if (!gap.empty() && gap != ",")
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": stray text in perturbation list: '" + gap + "'");
    const size_t close = value.find(')', open);
    if (close == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unbalanced parenthesis in perturbation");
    std::string triple = value.substr(open + 1, close - open - 1);
    for (auto& ch : triple)
      if (ch == ',') ch = ' ';
    std::istringstream iss(triple);
    PerturbationTerm term;
    if (!(iss >> term.degree >> term.order >> term.amplitude))
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": perturbation triple must be (degree, order, amplitude)");
    std::string extra;
    if (iss >> extra)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": trailing tokens in perturbation triple");
    terms.push_back(term);
    pos = close + 1;
  }
  const std::string leftover = trim(value.substr(pos));
  if (!leftover.empty() && leftover != ",")
    throw std::invalid_argument("config line " + std::to_string(line_no) +
                                ": stray text after perturbation list: '" + leftover + "'");
  if (terms.empty())
    throw std::invalid_argument("config line " + std::to_string(line_no) +
                                ": empty perturbation list");
  return terms;
}

}  // namespace

std::string symmetry_mode_name(SymmetryMode mode) {
  return mode == SymmetryMode::even ? "even" : "full";
}

SymmetryMode symmetry_mode_from_name(const std::string& name) {
  if (name == "even") return SymmetryMode::even;
  if (name == "full") return SymmetryMode::full;
  throw std::invalid_argument("symmetry_mode must be 'full' or 'even', got '" + name + "'");
}

ModelConfig parse_model_config_text(const std::string& text) {
  ModelConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": duplicate key '" + key + "'");
    try {
      if (key == "band_limit") {
        cfg.band_limit = std::stoi(value);
      } else if (key == "fiber_length") {
        cfg.fiber_length = std::stod(value);
      } else if (key == "symmetry_mode") {
        cfg.symmetry_mode = symmetry_mode_from_name(value);
      } else if (key == "perturbation") {
        cfg.perturbation = parse_perturbation(value, line_no);
      } else {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": cannot parse value '" + value + "' for key '" + key + "'");
    }
  }
  return cfg;
}

ModelConfig parse_model_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_config_text(buf.str());
}

}  // namespace tke
