#include "tke/io.hpp"

#include "tke/config.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace tke::io {

namespace {
json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vector_from_json(const json& arr) {
  VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
  return v;
}

json nan_safe(double x) {
  if (std::isnan(x)) return nullptr;
  return x;
}
}  // namespace

json to_json(const ModelConfig& cfg) {
  json j;
  j["band_limit"] = cfg.band_limit;
  j["fiber_length"] = cfg.fiber_length;
  j["symmetry_mode"] = symmetry_mode_name(cfg.symmetry_mode);
  json per = json::array();
  for (const auto& t : cfg.perturbation)
    per.push_back({{"degree", t.degree}, {"order", t.order}, {"amplitude", t.amplitude}});
  j["perturbation"] = per;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.band_limit = j.at("band_limit").get<int>();
  cfg.fiber_length = j.at("fiber_length").get<double>();
  cfg.symmetry_mode = symmetry_mode_from_name(j.at("symmetry_mode").get<std::string>());
  for (const auto& t : j.at("perturbation"))
    cfg.perturbation.push_back({t.at("degree").get<int>(), t.at("order").get<int>(),
                                t.at("amplitude").get<double>()});
  return cfg;
}

json to_json(const BasicFunction& f) {
  json j;
  j["band_limit"] = f.band_limit;
  j["even_only"] = f.even_only;
  j["coeff"] = vector_to_json(f.coeff);
  return j;
}

BasicFunction function_from_json(const json& j, const TransverseModel& model) {
  BasicFunction f = model.function_from_coeff(vector_from_json(j.at("coeff")));
  if (j.at("band_limit").get<int>() != f.band_limit)
    throw std::invalid_argument("function_from_json: band limit mismatch");
  return f;
}

json to_json(const ContinuityFamily& fam) {
  json j;
  j["equation"] = fam.equation == Equation::s1 ? "s1" : "s2";
  j["model"] = to_json(fam.model->config());
  j["reached_t"] = fam.reached_t;
  j["complete"] = fam.complete;
  json states = json::array();
  for (int k = 0; k < fam.size(); ++k) {
    json s;
    s["t"] = fam.t[k];
    s["coeff"] = vector_to_json(fam.u[k].coeff);
    s["residual"] = fam.newton[k].final_residual;
    s["newton_iterations"] = fam.newton[k].iterations;
    s["conv_order"] = nan_safe(fam.newton[k].conv_order);
    s["sigma_min"] = nan_safe(fam.newton[k].sigma_min);
    s["L"] = fam.trace[k].L;
    s["M"] = fam.trace[k].M;
    s["I"] = fam.trace[k].I;
    s["J"] = fam.trace[k].J;
    states.push_back(std::move(s));
  }
  j["states"] = states;
  if (fam.failure) {
    j["failure"] = {{"t", fam.failure->t},
                    {"last_residual", fam.failure->last_residual},
                    {"sigma_min", nan_safe(fam.failure->sigma_min)},
                    {"reason", fam.failure->reason}};
  }
  return j;
}

ContinuityFamily family_from_json(const json& j) {
  ContinuityFamily fam;
  fam.equation = j.at("equation").get<std::string>() == "s1" ? Equation::s1 : Equation::s2;
  fam.model = build_model(model_config_from_json(j.at("model")));
  fam.reached_t = j.at("reached_t").get<double>();
  fam.complete = j.at("complete").get<bool>();
  for (const auto& s : j.at("states")) {
    fam.t.push_back(s.at("t").get<double>());
    fam.u.push_back(fam.model->function_from_coeff(vector_from_json(s.at("coeff"))));
    NewtonRecord rec;
    rec.t = fam.t.back();
    rec.final_residual = s.at("residual").get<double>();
    rec.iterations = s.at("newton_iterations").get<int>();
    rec.conv_order = s.at("conv_order").is_null()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : s.at("conv_order").get<double>();
    rec.sigma_min = s.at("sigma_min").is_null()
                        ? std::numeric_limits<double>::quiet_NaN()
                        : s.at("sigma_min").get<double>();
    fam.newton.push_back(rec);
    FunctionalTrace tr;
    tr.L = s.at("L").get<double>();
    tr.M = s.at("M").get<double>();
    tr.I = s.at("I").get<double>();
    tr.J = s.at("J").get<double>();
    fam.trace.push_back(tr);
  }
  return fam;
}

json to_json(const FunctionalReport& rep) {
  json j;
  j["seed"] = rep.seed;
  j["samples"] = rep.samples;
  j["all_pass"] = rep.all_pass;
  j["chain_left_min_margin"] = rep.chain_left_min_margin;
  j["chain_right_min_margin"] = rep.chain_right_min_margin;
  json recs = json::array();
  for (const auto& r : rep.records)
    recs.push_back({{"identity", r.name},
                    {"sample", r.sample},
                    {"residual", r.residual},
                    {"tolerance", r.tolerance},
                    {"pass", r.pass}});
  j["records"] = recs;
  return j;
}

json to_json(const GreenBound& gb) {
  return {{"K", gb.K},
          {"reproduction_error", gb.reproduction_error},
          {"max_row_mean", gb.max_row_mean},
          {"symmetry_error", gb.symmetry_error}};
}

json to_json(const RescaledMetric& rm) {
  return {{"t", rm.t},
          {"mu", rm.mu},
          {"volume", rm.volume},
          {"volume_identity_error", rm.volume_identity_error},
          {"transverse_ricci_min", rm.transverse_ricci_min},
          {"sasaki_lower_bound", rm.sasaki_lower_bound},
          {"diameter", rm.diameter},
          {"diameter_method", rm.diameter_method}};
}

json to_json(const EstimateReport& rep) {
  json j;
  j["green_K"] = rep.green_K;
  j["fitted_C"] = rep.fitted_C;
  j["max_dMdt"] = rep.max_dMdt;
  j["max_identity_error"] = rep.max_identity_error;
  j["max_t_osc"] = rep.max_t_osc;
  j["m_monotone"] = rep.m_monotone;
  j["oscillation_bound_holds"] = rep.oscillation_bound_holds;
  j["xt_exists_everywhere"] = rep.xt_exists_everywhere;
  j["L_bound_holds"] = rep.L_bound_holds;
  json per = json::array();
  for (const auto& r : rep.per_t) {
    per.push_back({{"t", r.t},
                   {"osc", r.osc},
                   {"I", r.I},
                   {"L", r.L},
                   {"M", r.M},
                   {"sup_abs_u", r.sup_abs_u},
                   {"t_osc", r.t_osc},
                   {"x_t_node", r.x_t_node},
                   {"u_at_xt", r.u_at_xt},
                   {"L_minus_u_xt", r.L_minus_u_xt},
                   {"xt_exists", r.xt_exists},
                   {"dMdt", nan_safe(r.dMdt)},
                   {"identity_rhs", nan_safe(r.identity_rhs)},
                   {"identity_error", nan_safe(r.identity_error)},
                   {"osc_bound_slack", nan_safe(r.osc_bound_slack)}});
  }
  j["per_t"] = per;
  return j;
}

json to_json(const SpectrumResult& spec) {
  json j;
  j["eigenvalues"] = vector_to_json(spec.eigenvalues);
  j["lambda1"] = spec.lambda1;
  json mult = json::array();
  for (const auto& [v, c] : spec.multiplicity)
    mult.push_back({{"value", v}, {"multiplicity", c}});
  j["multiplicity"] = mult;
  json funcs = json::array();
  for (const auto& f : spec.eigenfunctions) funcs.push_back(to_json(f));
  j["eigenfunctions"] = funcs;
  return j;
}

json to_json(const DetectorResult& det) {
  json j;
  j["ambiguous"] = det.ambiguous;
  j["note"] = det.note;
  j["spectrum_window"] = vector_to_json(det.spectrum_window);
  json recs = json::array();
  for (const auto& r : det.records) {
    recs.push_back({{"hamiltonian", to_json(r.hamiltonian)},
                    {"eigenvalue", r.eigenvalue},
                    {"normalization_residual", r.normalization_residual},
                    {"eigen_residual", r.eigen_residual},
                    {"identity_residual", r.identity_residual},
                    {"chart_coeffs",
                     {{"a0", {r.chart_coeffs[0].real(), r.chart_coeffs[0].imag()}},
                      {"a1", {r.chart_coeffs[1].real(), r.chart_coeffs[1].imag()}},
                      {"a2", {r.chart_coeffs[2].real(), r.chart_coeffs[2].imag()}}}},
                    {"chart_fit_residual", r.chart_fit_residual}});
  }
  j["records"] = recs;
  return j;
}

json to_json(const UniquenessReport& rep) {
  json j;
  j["max_pairwise_distance"] = rep.max_pairwise_distance;
  j["t_final_distance"] = rep.t_final_distance;
  j["backward_endpoint_distance"] = rep.backward_endpoint_distance;
  j["backward_L0"] = rep.backward_L0;
  j["all_converged"] = rep.all_converged;
  json branches = json::array();
  for (const auto& b : rep.branches)
    branches.push_back({{"label", b.label}, {"family", to_json(b.family)}});
  j["branches"] = branches;
  return j;
}

void write_summary(const std::string& path, const std::string& schema, uint64_t seed,
                   const std::vector<Provenance>& provenance, json payload) {
  json j;
  j["schema"] = schema;
  j["seed"] = seed;
  json prov = json::array();
  for (const auto& p : provenance)
    prov.push_back({{"module", p.module}, {"operation", p.operation}, {"config", p.config}});
  j["provenance"] = prov;
  j["data"] = std::move(payload);
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  j["generated_at"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(now).count();

  const std::string full = resolve_output_path(path);
  std::ofstream out(full);
  if (!out) throw std::runtime_error("cannot write '" + full + "'");
  out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  const std::string full = resolve_output_path(path);
  std::ofstream out(full);
  if (!out) throw std::runtime_error("cannot write '" + full + "'");
  for (size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "\n");
  out.precision(17);
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "\n");
  }
}

std::string resolve_output_path(const std::string& path) {
  const char* dir = std::getenv("TKE_OUT_DIR");
  if (!dir || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(dir) / path).string();
}

}  // namespace tke::io
