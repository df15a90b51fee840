#include "idg/scenario.hpp"

#include "idg/io_util.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace idg {

using json = nlohmann::ordered_json;

namespace {

const json& require(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ScenarioError(path + "." + key, "missing field");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "expected a number");
  return j.get<double>();
}

Eigen::VectorXd as_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); k++)
    v[static_cast<Eigen::Index>(k)] = as_number(j[k], path + "[" + std::to_string(k) + "]");
  return v;
}

Expr parse_expr_field(const json& j, const std::string& path) {
  if (!j.is_string()) throw ScenarioError(path, "expected an expression string");
  try {
    return Expr::parse(j.get<std::string>());
  } catch (const ParseError& e) {
    throw ScenarioError(path, e.what());
  }
}

ExprVec parse_expr_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path, "expected an array of expressions");
  std::vector<Expr> out;
  for (std::size_t k = 0; k < j.size(); k++)
    out.push_back(parse_expr_field(j[k], path + "[" + std::to_string(k) + "]"));
  return ExprVec(std::move(out));
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); i++) out.push_back(v[i]);
  return out;
}

}  // namespace

WSelection Scenario::w_selection(int player) const {
  if (player < static_cast<int>(offline.w.size()))
    return offline.w[static_cast<std::size_t>(player)];
  return WSelection{};
}

Scenario load_scenario_string(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(origin, std::string("invalid JSON: ") + e.what());
  }

  Scenario sc;
  sc.schema_version = j.value("schema_version", 1);
  if (sc.schema_version != 1)
    throw ScenarioError("schema_version", "unsupported version " +
                        std::to_string(sc.schema_version));
  sc.name = require(j, "name", "scenario").get<std::string>();
  sc.seed = j.value("seed", std::uint64_t{0});

  // Dynamics and players.
  const json& jdyn = require(j, "dynamics", "scenario");
  Dynamics dyn;
  dyn.state_dim = static_cast<int>(as_number(require(jdyn, "state_dim", "dynamics"),
                                             "dynamics.state_dim"));
  dyn.f = parse_expr_list(require(jdyn, "f", "dynamics"), "dynamics.f");
  if (dyn.f.size() != dyn.state_dim)
    throw ScenarioError("dynamics.f", "expected " + std::to_string(dyn.state_dim) +
                        " components, got " + std::to_string(dyn.f.size()));
  if (dyn.f.min_state_dim() > dyn.state_dim)
    throw ScenarioError("dynamics.f", "references a variable beyond state_dim");

  const json& jplayers = require(jdyn, "players", "dynamics");
  if (!jplayers.is_array() || jplayers.empty())
    throw ScenarioError("dynamics.players", "expected a non-empty array");

  std::vector<PlayerModel> players;
  for (std::size_t i = 0; i < jplayers.size(); i++) {
    std::string path = "dynamics.players[" + std::to_string(i) + "]";
    const json& jp = jplayers[i];
    const json& jg = require(jp, "g", path);
    if (!jg.is_array() || jg.empty())
      throw ScenarioError(path + ".g", "expected a non-empty row array");
    int rows = static_cast<int>(jg.size());
    if (rows != dyn.state_dim)
      throw ScenarioError(path + ".g", "expected " + std::to_string(dyn.state_dim) + " rows");
    int cols = static_cast<int>(jg[0].size());
    ExprMat g(rows, cols);
    for (int r = 0; r < rows; r++) {
      if (static_cast<int>(jg[static_cast<std::size_t>(r)].size()) != cols)
        throw ScenarioError(path + ".g", "ragged rows");
      for (int c = 0; c < cols; c++)
        g(r, c) = parse_expr_field(jg[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)],
                                   path + ".g[" + std::to_string(r) + "][" +
                                       std::to_string(c) + "]");
    }
    dyn.g.push_back(std::move(g));

    PlayerModel pm;
    pm.value_basis = parse_expr_list(require(jp, "phi", path), path + ".phi");
    pm.cost_basis = parse_expr_list(require(jp, "psi", path), path + ".psi");
    pm.beta = as_vector(require(jp, "beta", path), path + ".beta");
    pm.r_diag = as_vector(require(jp, "alpha", path), path + ".alpha");
    if (pm.beta.size() != pm.cost_basis.size())
      throw ScenarioError(path + ".beta", "length " + std::to_string(pm.beta.size()) +
                          " != cost basis size " + std::to_string(pm.cost_basis.size()));
    if (jp.contains("theta")) {
      pm.theta = as_vector(jp["theta"], path + ".theta");
      if (pm.theta->size() != pm.value_basis.size())
        throw ScenarioError(path + ".theta", "length != value basis size");
    }
    if (jp.contains("value_expr"))
      pm.value_expr = parse_expr_field(jp["value_expr"], path + ".value_expr");
    players.push_back(std::move(pm));
  }

  const int p = [&] {
    int total = 0;
    for (const ExprMat& g : dyn.g) total += g.cols();
    return total;
  }();
  for (std::size_t i = 0; i < players.size(); i++)
    if (players[i].r_diag.size() != p)
      throw ScenarioError("dynamics.players[" + std::to_string(i) + "].alpha",
                          "length " + std::to_string(players[i].r_diag.size()) +
                              " != total control dim " + std::to_string(p));

  sc.model.dynamics = std::move(dyn);
  sc.model.players = std::move(players);

  // Cost offsets, per player, optional.
  sc.cost_offsets.assign(sc.model.players.size(), std::nullopt);
  for (std::size_t i = 0; i < jplayers.size(); i++)
    if (jplayers[i].contains("cost_offset"))
      sc.cost_offsets[i] = parse_expr_field(jplayers[i]["cost_offset"],
                                            "dynamics.players[" + std::to_string(i) +
                                                "].cost_offset");

  // Domain box.
  const json& jdom = require(j, "domain", "scenario");
  sc.model.domain.lower = as_vector(require(jdom, "lower", "domain"), "domain.lower");
  sc.model.domain.upper = as_vector(require(jdom, "upper", "domain"), "domain.upper");
  sc.model.domain.step = as_vector(require(jdom, "step", "domain"), "domain.step");
  if (sc.model.domain.lower.size() != sc.model.dynamics.state_dim ||
      sc.model.domain.upper.size() != sc.model.dynamics.state_dim ||
      sc.model.domain.step.size() != sc.model.dynamics.state_dim)
    throw ScenarioError("domain", "bounds must match state_dim");
  for (int d = 0; d < sc.model.dynamics.state_dim; d++)
    if (!(sc.model.domain.lower[d] < sc.model.domain.upper[d]))
      throw ScenarioError("domain", "lower must be below upper");
  if (!sc.model.domain.contains_origin())
    throw ScenarioError("domain", "must contain the origin");

  // Demonstration plan.
  const json& jdemo = require(j, "demonstrations", "scenario");
  const json& jinits = require(jdemo, "inits", "demonstrations");
  for (std::size_t k = 0; k < jinits.size(); k++) {
    Eigen::VectorXd x0 = as_vector(jinits[k], "demonstrations.inits[" + std::to_string(k) + "]");
    if (x0.size() != sc.model.dynamics.state_dim)
      throw ScenarioError("demonstrations.inits[" + std::to_string(k) + "]",
                          "dimension mismatch");
    sc.demos.inits.push_back(std::move(x0));
  }
  if (sc.demos.inits.empty())
    throw ScenarioError("demonstrations.inits", "at least one initial state required");
  sc.demos.segment_T = as_number(require(jdemo, "segment_T", "demonstrations"),
                                 "demonstrations.segment_T");
  sc.demos.h = as_number(require(jdemo, "h", "demonstrations"), "demonstrations.h");
  sc.demos.dt = as_number(require(jdemo, "dt", "demonstrations"), "demonstrations.dt");
  if (jdemo.contains("load_csv"))
    sc.demos.load_csv = jdemo["load_csv"].get<std::string>();

  // Offline options.
  if (j.contains("offline")) {
    const json& joff = j["offline"];
    sc.offline.rank_rtol = joff.value("rank_rtol", sc.offline.rank_rtol);
    sc.offline.split_tol = joff.value("split_tol", sc.offline.split_tol);
    sc.offline.pi_tol = joff.value("pi_tol", sc.offline.pi_tol);
    sc.offline.pi_max_iter = joff.value("pi_max_iter", sc.offline.pi_max_iter);
    if (joff.contains("w")) {
      const json& jw = joff["w"];
      if (!jw.is_array()) throw ScenarioError("offline.w", "expected per-player array");
      for (std::size_t i = 0; i < jw.size(); i++) {
        WSelection sel;
        if (!jw[i].is_null())
          sel.fixed = as_vector(jw[i], "offline.w[" + std::to_string(i) + "]");
        sc.offline.w.push_back(std::move(sel));
      }
    }
    if (joff.contains("w_search")) {
      const json& js = joff["w_search"];
      WSelection base;
      base.lo = js.value("lo", base.lo);
      base.hi = js.value("hi", base.hi);
      base.samples = js.value("samples", base.samples);
      if (sc.offline.w.empty())
        sc.offline.w.assign(sc.model.players.size(), base);
      else
        for (WSelection& sel : sc.offline.w)
          if (!sel.fixed) { sel.lo = base.lo; sel.hi = base.hi; sel.samples = base.samples; }
    }
  }

  // Online configuration.
  if (j.contains("online")) {
    const json& jon = j["online"];
    auto rates = [&](const char* key) {
      std::vector<double> out;
      if (!jon.contains(key)) return out;
      if (jon[key].is_number()) {
        out.push_back(jon[key].get<double>());
      } else {
        Eigen::VectorXd v = as_vector(jon[key], std::string("online.") + key);
        for (Eigen::Index i = 0; i < v.size(); i++) out.push_back(v[i]);
      }
      return out;
    };
    sc.online.tau = rates("tau");
    sc.online.kappa = rates("kappa");
    sc.online.h = jon.value("h", sc.online.h);
    sc.online.window_T = jon.value("window_T", sc.online.window_T);
    sc.online.stop_threshold = jon.value("stop_threshold", sc.online.stop_threshold);
    sc.online.horizon = jon.value("horizon", sc.online.horizon);
    sc.online.trace_decimation = jon.value("trace_decimation", sc.online.trace_decimation);
    if (jon.contains("excitation")) {
      const json& je = jon["excitation"];
      sc.online.excitation.amplitude = je.value("amplitude", sc.online.excitation.amplitude);
      sc.online.excitation.sines_per_channel =
          je.value("sines_per_channel", sc.online.excitation.sines_per_channel);
      sc.online.excitation.freq_min_hz = je.value("freq_min_hz", sc.online.excitation.freq_min_hz);
      sc.online.excitation.freq_max_hz = je.value("freq_max_hz", sc.online.excitation.freq_max_hz);
    }
    double nyquist = 0.5 / sc.online.h;
    if (sc.online.excitation.freq_min_hz <= 0 ||
        sc.online.excitation.freq_max_hz < sc.online.excitation.freq_min_hz ||
        sc.online.excitation.freq_max_hz >= nyquist)
      throw ScenarioError("online.excitation", "frequency range must lie in (0, Nyquist)");
    if (!(sc.online.window_T > 0) || !(sc.online.h > 0) || !(sc.online.horizon > 0))
      throw ScenarioError("online", "h, window_T and horizon must be positive");
    for (double v : sc.online.tau)
      if (!(v > 0)) throw ScenarioError("online.tau", "learning rates must be positive");
    for (double v : sc.online.kappa)
      if (!(v > 0)) throw ScenarioError("online.kappa", "learning rates must be positive");
  }
  sc.online.seed = sc.seed;

  sc.diagnostics = validate(sc.model);
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return load_scenario_string(read_file(path), path.string());
}

std::string serialize_scenario(const Scenario& sc) {
  json j;
  j["schema_version"] = sc.schema_version;
  j["name"] = sc.name;
  j["seed"] = sc.seed;
  json jdyn;
  jdyn["state_dim"] = sc.model.dynamics.state_dim;
  json jf = json::array();
  for (const Expr& e : sc.model.dynamics.f) jf.push_back(e.str());
  jdyn["f"] = jf;
  json jplayers = json::array();
  for (int i = 0; i < sc.model.num_players(); i++) {
    const PlayerModel& pm = sc.model.players[static_cast<std::size_t>(i)];
    const ExprMat& g = sc.model.dynamics.g[static_cast<std::size_t>(i)];
    json jp;
    json jg = json::array();
    for (int r = 0; r < g.rows(); r++) {
      json row = json::array();
      for (int c = 0; c < g.cols(); c++) row.push_back(g(r, c).str());
      jg.push_back(row);
    }
    jp["g"] = jg;
    json jphi = json::array(), jpsi = json::array();
    for (const Expr& e : pm.value_basis) jphi.push_back(e.str());
    for (const Expr& e : pm.cost_basis) jpsi.push_back(e.str());
    jp["phi"] = jphi;
    jp["psi"] = jpsi;
    jp["alpha"] = vector_to_json(pm.r_diag);
    jp["beta"] = vector_to_json(pm.beta);
    if (pm.theta) jp["theta"] = vector_to_json(*pm.theta);
    if (pm.value_expr) jp["value_expr"] = pm.value_expr->str();
    if (sc.cost_offsets[static_cast<std::size_t>(i)])
      jp["cost_offset"] = sc.cost_offsets[static_cast<std::size_t>(i)]->str();
    jplayers.push_back(std::move(jp));
  }
  jdyn["players"] = jplayers;
  j["dynamics"] = jdyn;
  j["domain"] = {{"lower", vector_to_json(sc.model.domain.lower)},
                 {"upper", vector_to_json(sc.model.domain.upper)},
                 {"step", vector_to_json(sc.model.domain.step)}};
  json jdemo;
  json jinits = json::array();
  for (const Eigen::VectorXd& x : sc.demos.inits) jinits.push_back(vector_to_json(x));
  jdemo["inits"] = jinits;
  jdemo["segment_T"] = sc.demos.segment_T;
  jdemo["h"] = sc.demos.h;
  jdemo["dt"] = sc.demos.dt;
  if (sc.demos.load_csv) jdemo["load_csv"] = sc.demos.load_csv->string();
  j["demonstrations"] = jdemo;
  json joff;
  joff["rank_rtol"] = sc.offline.rank_rtol;
  joff["split_tol"] = sc.offline.split_tol;
  joff["pi_tol"] = sc.offline.pi_tol;
  joff["pi_max_iter"] = sc.offline.pi_max_iter;
  if (!sc.offline.w.empty()) {
    json jw = json::array();
    for (const WSelection& sel : sc.offline.w) {
      if (sel.fixed)
        jw.push_back(vector_to_json(*sel.fixed));
      else
        jw.push_back(nullptr);
    }
    joff["w"] = jw;
  }
  j["offline"] = joff;
  json jon;
  if (!sc.online.tau.empty()) jon["tau"] = sc.online.tau;
  if (!sc.online.kappa.empty()) jon["kappa"] = sc.online.kappa;
  jon["h"] = sc.online.h;
  jon["window_T"] = sc.online.window_T;
  jon["stop_threshold"] = sc.online.stop_threshold;
  jon["horizon"] = sc.online.horizon;
  jon["trace_decimation"] = sc.online.trace_decimation;
  jon["excitation"] = {{"amplitude", sc.online.excitation.amplitude},
                       {"sines_per_channel", sc.online.excitation.sines_per_channel},
                       {"freq_min_hz", sc.online.excitation.freq_min_hz},
                       {"freq_max_hz", sc.online.excitation.freq_max_hz}};
  j["online"] = jon;
  return j.dump(2) + "\n";
}

std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides) {
  if (overrides.empty()) return json_text;
  json j = json::parse(json_text);
  for (const std::string& entry : overrides) {
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override must be key=value: " + entry);
    std::string key = entry.substr(0, eq);
    std::string value = entry.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;  // plain string
    }
    json* node = &j;
    std::stringstream ks(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ks, part, '.')) parts.push_back(part);
    for (std::size_t k = 0; k + 1 < parts.size(); k++) node = &(*node)[parts[k]];
    (*node)[parts.back()] = parsed;
  }
  return j.dump(2) + "\n";
}

}  // namespace idg
