#include "radon/config.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

namespace radon {

using nlohmann::json;

std::string policy_name(const SchedulingPolicy& p) {
  if (std::holds_alternative<PolicyOne>(p)) return "one";
  if (std::holds_alternative<PolicyRoundRobin>(p)) return "round-robin";
  if (std::holds_alternative<PolicyOnDemand>(p)) return "on-demand";
  return "on-demand-expire";
}

Result<std::chrono::milliseconds> parse_duration(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == 0) return make_error(Errc::syntax_error, "duration missing digits: '" + s + "'");
  std::string unit = s.substr(i);
  long long v = 0;
  try {
    v = std::stoll(s.substr(0, i));
  } catch (const std::exception&) {
    return make_error(Errc::syntax_error, "duration out of range: '" + s + "'");
  }
  if (unit == "s") return std::chrono::milliseconds(v * 1000);
  if (unit == "ms") return std::chrono::milliseconds(v);
  return make_error(Errc::syntax_error, "duration unit must be s or ms: '" + s + "'");
}

std::string render_duration(std::chrono::milliseconds d) {
  auto ms = d.count();
  if (ms % 1000 == 0) return std::to_string(ms / 1000) + "s";
  return std::to_string(ms) + "ms";
}

Result<AtomName> expand_name_template(const std::string& templ, const std::string& node_id) {
  std::string out = templ;
  const std::string ph = "{node}";
  for (auto pos = out.find(ph); pos != std::string::npos; pos = out.find(ph, pos)) {
    out.replace(pos, ph.size(), node_id);
    pos += node_id.size();
  }
  return AtomName::parse(out);
}

bool host_eligible(const HostConstraint& hc, const std::string& node_id,
                   const std::set<std::string>& tags) {
  if (const auto* list = std::get_if<std::vector<std::string>>(&hc)) {
    if (list->empty()) return true;
    return std::find(list->begin(), list->end(), node_id) != list->end();
  }
  const auto& tc = std::get<HostTags>(hc);
  for (const auto& t : tc.allow_tags)
    if (!tags.count(t)) return false;
  for (const auto& t : tc.deny_tags)
    if (tags.count(t)) return false;
  return true;
}

Result<void> validate_configuration(const AtomConfiguration& cfg) {
  if (cfg.definition.empty())
    return make_error(Errc::semantic_error, "configuration missing definition");
  if (auto r = check_name_lexical(cfg.definition); !r)
    return make_error(Errc::semantic_error, "bad definition name: " + r.error().message);

  if (cfg.kind == AtomKind::Daemon) {
    if (cfg.name.empty())
      return make_error(Errc::semantic_error,
                        "daemon config for '" + cfg.definition + "' missing name");
    if (cfg.scheduling)
      return make_error(Errc::semantic_error,
                        "daemon config '" + cfg.name + "' must not carry a scheduling policy");
    if (!cfg.routes.empty())
      return make_error(Errc::semantic_error,
                        "daemon config '" + cfg.name + "' must not carry routes");
    if (auto r = expand_name_template(cfg.name, "node0"); !r)
      return make_error(Errc::semantic_error,
                        "bad daemon name '" + cfg.name + "': " + r.error().message);
  } else {
    if (!cfg.name.empty())
      return make_error(Errc::semantic_error,
                        "reactive config for '" + cfg.definition + "' must not fix a name");
    if (!cfg.scheduling)
      return make_error(Errc::semantic_error,
                        "reactive config for '" + cfg.definition + "' missing scheduling policy");
    if (cfg.routes.empty())
      return make_error(Errc::semantic_error,
                        "reactive config for '" + cfg.definition + "' needs at least one route");
    if (const auto* rr = std::get_if<PolicyRoundRobin>(&*cfg.scheduling)) {
      if (rr->limit < 1)
        return make_error(Errc::semantic_error, "round-robin limit must be >= 1");
    }
    if (const auto* ode = std::get_if<PolicyOnDemandExpire>(&*cfg.scheduling)) {
      if (!ode->idle_timeout && !ode->max_events)
        return make_error(Errc::semantic_error,
                          "on-demand-expire needs idle_timeout or max_events");
      if (ode->max_events && *ode->max_events < 1)
        return make_error(Errc::semantic_error, "max_events must be >= 1");
      if (ode->idle_timeout && ode->idle_timeout->count() < 0)
        return make_error(Errc::semantic_error, "idle_timeout must not be negative");
    }
    for (const auto& rt : cfg.routes) {
      if (rt.method.empty())
        return make_error(Errc::semantic_error, "route missing method");
      if (rt.path_prefix.empty() || rt.path_prefix[0] != '/')
        return make_error(Errc::semantic_error,
                          "route path_prefix must begin with '/': '" + rt.path_prefix + "'");
    }
  }

  if (const auto* tc = std::get_if<HostTags>(&cfg.hosts)) {
    for (const auto& t : tc->allow_tags)
      if (tc->deny_tags.count(t))
        return make_error(Errc::semantic_error,
                          "tag '" + t + "' appears in both allow_tags and deny_tags");
  }
  return {};
}

namespace {

const char* kind_str(AtomKind k) { return k == AtomKind::Daemon ? "daemon" : "reactive"; }

const char* recovery_str(RecoveryPolicy r) {
  switch (r) {
    case RecoveryPolicy::None: return "none";
    case RecoveryPolicy::Escalate: return "escalate";
    case RecoveryPolicy::Restart: return "restart";
    case RecoveryPolicy::Recover: return "recover";
  }
  return "none";
}

Result<RecoveryPolicy> parse_recovery(const std::string& s) {
  if (s == "none") return RecoveryPolicy::None;
  if (s == "escalate") return RecoveryPolicy::Escalate;
  if (s == "restart") return RecoveryPolicy::Restart;
  if (s == "recover") return RecoveryPolicy::Recover;
  return make_error(Errc::semantic_error, "unknown recovery policy '" + s + "'");
}

Result<SchedulingPolicy> parse_policy(const json& j) {
  if (!j.is_object() || !j.contains("policy") || !j["policy"].is_string())
    return make_error(Errc::semantic_error, "scheduling must be an object with a policy field");
  std::string p = j["policy"].get<std::string>();
  if (p == "one") return SchedulingPolicy{PolicyOne{}};
  if (p == "round-robin") {
    PolicyRoundRobin rr;
    if (!j.contains("limit") || !j["limit"].is_number_unsigned())
      return make_error(Errc::semantic_error, "round-robin needs a positive integer limit");
    rr.limit = j["limit"].get<uint32_t>();
    return SchedulingPolicy{rr};
  }
  if (p == "on-demand") return SchedulingPolicy{PolicyOnDemand{}};
  if (p == "on-demand-expire") {
    PolicyOnDemandExpire ode;
    if (j.contains("idle_timeout")) {
      if (!j["idle_timeout"].is_string())
        return make_error(Errc::semantic_error, "idle_timeout must be a duration string");
      auto d = parse_duration(j["idle_timeout"].get<std::string>());
      if (!d) return d.error();
      ode.idle_timeout = d.value();
    }
    if (j.contains("max_events")) {
      if (!j["max_events"].is_number_unsigned())
        return make_error(Errc::semantic_error, "max_events must be a positive integer");
      ode.max_events = j["max_events"].get<uint64_t>();
    }
    return SchedulingPolicy{ode};
  }
  return make_error(Errc::semantic_error, "unknown scheduling policy '" + p + "'");
}

json render_policy(const SchedulingPolicy& p) {
  json j;
  j["policy"] = policy_name(p);
  if (const auto* rr = std::get_if<PolicyRoundRobin>(&p)) {
    j["limit"] = rr->limit;
  } else if (const auto* ode = std::get_if<PolicyOnDemandExpire>(&p)) {
    if (ode->idle_timeout) j["idle_timeout"] = render_duration(*ode->idle_timeout);
    if (ode->max_events) j["max_events"] = *ode->max_events;
  }
  return j;
}

Result<AtomConfiguration> config_from_json(const json& j) {
  if (!j.is_object()) return make_error(Errc::semantic_error, "atom entry must be an object");
  AtomConfiguration cfg;

  if (!j.contains("definition") || !j["definition"].is_string())
    return make_error(Errc::semantic_error, "atom entry missing definition");
  cfg.definition = j["definition"].get<std::string>();

  if (!j.contains("kind") || !j["kind"].is_string())
    return make_error(Errc::semantic_error, "atom entry missing kind");
  std::string kind = j["kind"].get<std::string>();
  if (kind == "daemon") {
    cfg.kind = AtomKind::Daemon;
  } else if (kind == "reactive") {
    cfg.kind = AtomKind::Reactive;
  } else {
    return make_error(Errc::semantic_error, "kind must be daemon or reactive, got '" + kind + "'");
  }

  if (j.contains("name")) {
    if (!j["name"].is_string())
      return make_error(Errc::semantic_error, "name must be a string");
    cfg.name = j["name"].get<std::string>();
  }

  if (j.contains("scheduling")) {
    auto p = parse_policy(j["scheduling"]);
    if (!p) return p.error();
    cfg.scheduling = p.value();
  }

  if (j.contains("recovery")) {
    if (!j["recovery"].is_string())
      return make_error(Errc::semantic_error, "recovery must be a string");
    auto r = parse_recovery(j["recovery"].get<std::string>());
    if (!r) return r.error();
    cfg.recovery = r.value();
  }  // absent -> None

  if (j.contains("hosts")) {
    const auto& h = j["hosts"];
    if (h.is_array()) {
      std::vector<std::string> list;
      for (const auto& e : h) {
        if (!e.is_string()) return make_error(Errc::semantic_error, "hosts entries must be strings");
        list.push_back(e.get<std::string>());
      }
      cfg.hosts = std::move(list);
    } else if (h.is_object()) {
      HostTags tc;
      if (h.contains("allow_tags"))
        for (const auto& e : h["allow_tags"]) tc.allow_tags.insert(e.get<std::string>());
      if (h.contains("deny_tags"))
        for (const auto& e : h["deny_tags"]) tc.deny_tags.insert(e.get<std::string>());
      cfg.hosts = std::move(tc);
    } else {
      return make_error(Errc::semantic_error, "hosts must be a list or a tag constraint object");
    }
  }

  if (j.contains("routes")) {
    if (!j["routes"].is_array())
      return make_error(Errc::semantic_error, "routes must be a list");
    for (const auto& e : j["routes"]) {
      if (!e.is_object() || !e.contains("method") || !e.contains("path_prefix"))
        return make_error(Errc::semantic_error, "route needs method and path_prefix");
      cfg.routes.push_back(
          EventRoute{e["method"].get<std::string>(), e["path_prefix"].get<std::string>()});
    }
  }

  if (auto v = validate_configuration(cfg); !v) return v.error();
  return cfg;
}

json config_to_json(const AtomConfiguration& cfg) {
  json j;
  j["definition"] = cfg.definition;
  j["kind"] = kind_str(cfg.kind);
  if (!cfg.name.empty()) j["name"] = cfg.name;
  if (cfg.scheduling) j["scheduling"] = render_policy(*cfg.scheduling);
  j["recovery"] = recovery_str(cfg.recovery);
  if (const auto* list = std::get_if<std::vector<std::string>>(&cfg.hosts)) {
    if (!list->empty()) j["hosts"] = *list;
  } else {
    const auto& tc = std::get<HostTags>(cfg.hosts);
    json h = json::object();
    h["allow_tags"] = tc.allow_tags;
    h["deny_tags"] = tc.deny_tags;
    j["hosts"] = h;
  }
  if (!cfg.routes.empty()) {
    json rs = json::array();
    for (const auto& r : cfg.routes) rs.push_back({{"method", r.method}, {"path_prefix", r.path_prefix}});
    j["routes"] = rs;
  }
  return j;
}

}  // namespace

Result<std::vector<AtomConfiguration>> parse_configuration(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    return make_error(Errc::syntax_error,
                      std::string(e.what()) + " (byte " + std::to_string(e.byte) + ")");
  }
  if (!doc.is_object() || !doc.contains("atoms") || !doc["atoms"].is_array())
    return make_error(Errc::semantic_error, "document must have a top-level atoms list");

  std::vector<AtomConfiguration> out;
  std::unordered_set<std::string> daemon_names;
  for (const auto& entry : doc["atoms"]) {
    auto cfg = config_from_json(entry);
    if (!cfg) return cfg.error();
    if (cfg.value().kind == AtomKind::Daemon) {
      if (!daemon_names.insert(cfg.value().name).second)
        return make_error(Errc::semantic_error,
                          "duplicate daemon name '" + cfg.value().name + "' in document");
    }
    out.push_back(std::move(cfg.value()));
  }
  return out;
}

Result<AtomConfiguration> parse_one_configuration(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    return make_error(Errc::syntax_error,
                      std::string(e.what()) + " (byte " + std::to_string(e.byte) + ")");
  }
  return config_from_json(j);
}

std::string render_configuration(const std::vector<AtomConfiguration>& configs) {
  json doc;
  doc["atoms"] = json::array();
  for (const auto& c : configs) doc["atoms"].push_back(config_to_json(c));
  return doc.dump(2);
}

std::string render_one_configuration(const AtomConfiguration& cfg) {
  return config_to_json(cfg).dump();
}

}  // namespace radon
