#include "pwdts/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <set>

namespace pwdts::cli {

namespace {

using json = nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  require(obj.is_object(), where + ": expected an object");
  for (const auto& item : obj.items()) {
    require(allowed.count(item.key()) > 0, where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": invalid value for '" + key + "'");
  }
}

void read_gibbs(const json& j, GibbsConfig& g) {
  check_keys(j, {"iterations", "burn_in", "seed", "alpha_convergence_threshold", "max_alpha_iterations"}, "gibbs");
  read(j, "iterations", g.iterations, "gibbs");
  read(j, "burn_in", g.burn_in, "gibbs");
  read(j, "seed", g.seed, "gibbs");
  read(j, "alpha_convergence_threshold", g.alpha_convergence_threshold, "gibbs");
  read(j, "max_alpha_iterations", g.max_alpha_iterations, "gibbs");
}

json gibbs_json(const GibbsConfig& g) {
  return {{"iterations", g.iterations},
          {"burn_in", g.burn_in},
          {"seed", g.seed},
          {"alpha_convergence_threshold", g.alpha_convergence_threshold},
          {"max_alpha_iterations", g.max_alpha_iterations}};
}

}  // namespace

void RunConfig::validate() const {
  gibbs.validate();
  for (const auto& f : formats) require(f == "csv" || f == "json", "config: unknown output format '" + f + "'");
  require(simulate.setting == "stationary" || simulate.setting == "setting1" || simulate.setting == "setting2",
          "config: unknown simulation setting '" + simulate.setting + "'");
  require(simulate.reps >= 2, "config: simulate.reps must be at least 2");
  require(!simulate.J || *simulate.J >= 2, "config: simulate.J must be at least 2");
  require(!simulate.T || *simulate.T >= 11, "config: simulate.T must be at least 11");
  require(bma_refresh >= 1, "config: bma refresh must be at least 1");
  for (const auto& m : methods) {
    const auto& kinds = method_kinds();
    require(std::find(kinds.begin(), kinds.end(), m.kind) != kinds.end(), "config: unknown method '" + m.kind + "'");
    require(m.refit_every >= 1, "config: refit_every must be at least 1");
  }
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  check_keys(j,
             {"data", "portfolios", "factors", "intercept", "subtract_rf", "scale", "date_from", "date_to", "methods",
              "benchmark", "reference", "start", "bma", "simulate", "gibbs", "seed", "output_dir", "formats"},
             "config");
  RunConfig c;
  read(j, "data", c.data, "config");
  read(j, "portfolios", c.ingest.portfolios, "config");
  read(j, "factors", c.ingest.factors, "config");
  read(j, "intercept", c.ingest.intercept, "config");
  read(j, "subtract_rf", c.ingest.subtract_rf, "config");
  read(j, "scale", c.ingest.scale, "config");
  read(j, "date_from", c.ingest.date_from, "config");
  read(j, "date_to", c.ingest.date_to, "config");
  read(j, "benchmark", c.benchmark, "config");
  read(j, "reference", c.reference, "config");
  read(j, "start", c.start, "config");
  read(j, "seed", c.seed, "config");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "formats", c.formats, "config");
  if (j.contains("gibbs")) read_gibbs(j.at("gibbs"), c.gibbs);
  if (j.contains("bma")) {
    const json& b = j.at("bma");
    check_keys(b, {"factors", "refresh"}, "bma");
    read(b, "factors", c.bma_factors, "bma");
    read(b, "refresh", c.bma_refresh, "bma");
  }
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    check_keys(s, {"setting", "reps", "threads", "J", "T", "dump_panel"}, "simulate");
    read(s, "setting", c.simulate.setting, "simulate");
    read(s, "reps", c.simulate.reps, "simulate");
    read(s, "threads", c.simulate.threads, "simulate");
    if (s.contains("J")) {
      Index v = 0;
      read(s, "J", v, "simulate");
      c.simulate.J = v;
    }
    if (s.contains("T")) {
      Index v = 0;
      read(s, "T", v, "simulate");
      c.simulate.T = v;
    }
    read(s, "dump_panel", c.simulate.dump_panel, "simulate");
  }
  if (j.contains("methods")) {
    const json& ms = j.at("methods");
    require(ms.is_array(), "config: 'methods' must be an array");
    for (const json& m : ms) {
      MethodConfig mc;
      if (m.is_string()) {
        mc.kind = m.get<std::string>();
      } else {
        check_keys(m, {"kind", "label", "window", "refit_every", "factors", "bma_refresh"}, "method");
        read(m, "kind", mc.kind, "method");
        read(m, "label", mc.label, "method");
        read(m, "window", mc.window, "method");
        read(m, "refit_every", mc.refit_every, "method");
        read(m, "factors", mc.factors, "method");
        read(m, "bma_refresh", mc.bma_refresh, "method");
      }
      require(!mc.kind.empty(), "method: missing 'kind'");
      c.methods.push_back(std::move(mc));
    }
  }
  c.validate();
  return c;
}

std::string to_json(const RunConfig& c) {
  json methods = json::array();
  for (const auto& m : c.methods) {
    methods.push_back({{"kind", m.kind},
                       {"label", m.label},
                       {"window", m.window},
                       {"refit_every", m.refit_every},
                       {"factors", m.factors},
                       {"bma_refresh", m.bma_refresh}});
  }
  json sim = {{"setting", c.simulate.setting},
              {"reps", c.simulate.reps},
              {"threads", c.simulate.threads},
              {"dump_panel", c.simulate.dump_panel}};
  if (c.simulate.J) sim["J"] = *c.simulate.J;
  if (c.simulate.T) sim["T"] = *c.simulate.T;
  const json j = {{"data", c.data},
                  {"portfolios", c.ingest.portfolios},
                  {"factors", c.ingest.factors},
                  {"intercept", c.ingest.intercept},
                  {"subtract_rf", c.ingest.subtract_rf},
                  {"scale", c.ingest.scale},
                  {"date_from", c.ingest.date_from},
                  {"date_to", c.ingest.date_to},
                  {"methods", methods},
                  {"benchmark", c.benchmark},
                  {"reference", c.reference},
                  {"start", c.start},
                  {"bma", {{"factors", c.bma_factors}, {"refresh", c.bma_refresh}}},
                  {"simulate", sim},
                  {"gibbs", gibbs_json(c.gibbs)},
                  {"seed", c.seed},
                  {"output_dir", c.output_dir},
                  {"formats", c.formats}};
  return j.dump();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pwdts::cli
