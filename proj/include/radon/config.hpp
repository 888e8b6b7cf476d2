#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "radon/names.hpp"
#include "radon/result.hpp"

namespace radon {

enum class AtomKind { Daemon, Reactive };

enum class RecoveryPolicy { None, Escalate, Restart, Recover };

struct PolicyOne {
  friend bool operator==(const PolicyOne&, const PolicyOne&) = default;
};
struct PolicyRoundRobin {
  uint32_t limit = 1;  // >= 1
  friend bool operator==(const PolicyRoundRobin&, const PolicyRoundRobin&) = default;
};
struct PolicyOnDemand {
  friend bool operator==(const PolicyOnDemand&, const PolicyOnDemand&) = default;
};
struct PolicyOnDemandExpire {
  // At least one criterion must be set.
  std::optional<std::chrono::milliseconds> idle_timeout;
  std::optional<uint64_t> max_events;  // >= 1 when set
  friend bool operator==(const PolicyOnDemandExpire&, const PolicyOnDemandExpire&) = default;
};

using SchedulingPolicy =
    std::variant<PolicyOne, PolicyRoundRobin, PolicyOnDemand, PolicyOnDemandExpire>;

std::string policy_name(const SchedulingPolicy& p);

/// Routes an external (method, path) onto a reactive definition. Longest
/// path prefix wins; an exact tie across definitions is a deployment error.
struct EventRoute {
  std::string method;       // e.g. "GET"
  std::string path_prefix;  // begins with '/'
  friend bool operator==(const EventRoute&, const EventRoute&) = default;
};

/// Either an explicit host list or an allow/deny tag constraint.
struct HostTags {
  std::set<std::string> allow_tags;
  std::set<std::string> deny_tags;  // disjoint from allow_tags
  friend bool operator==(const HostTags&, const HostTags&) = default;
};
using HostConstraint = std::variant<std::vector<std::string>, HostTags>;

struct AtomConfiguration {
  std::string definition;
  AtomKind kind = AtomKind::Daemon;
  std::optional<SchedulingPolicy> scheduling;  // reactive only
  RecoveryPolicy recovery = RecoveryPolicy::None;
  HostConstraint hosts = std::vector<std::string>{};  // empty list = all hosts
  std::vector<EventRoute> routes;                     // reactive only, >= 1
  std::string name;  // daemon only; may contain the "{node}" placeholder

  friend bool operator==(const AtomConfiguration&, const AtomConfiguration&) = default;
};

/// Checks every TYPE invariant of one configuration. `name` is validated as
/// a template: "{node}" is substituted with a sample node id first.
Result<void> validate_configuration(const AtomConfiguration& cfg);

/// Substitutes "{node}" in a daemon name template and re-validates.
Result<AtomName> expand_name_template(const std::string& templ, const std::string& node_id);

/// Whether a node with `node_id` and `tags` is eligible under the constraint.
bool host_eligible(const HostConstraint& hc, const std::string& node_id,
                   const std::set<std::string>& tags);

/// Parses a configuration document (JSON, top-level key "atoms"). Returns the
/// configurations in document order with all invariants validated, including
/// document-wide ones (duplicate daemon names).
Result<std::vector<AtomConfiguration>> parse_configuration(const std::string& text);

/// Parses a single configuration object (the SpawnRequest wire payload).
Result<AtomConfiguration> parse_one_configuration(const std::string& text);

std::string render_configuration(const std::vector<AtomConfiguration>& configs);
std::string render_one_configuration(const AtomConfiguration& cfg);

/// Duration strings: "<int>s" or "<int>ms".
Result<std::chrono::milliseconds> parse_duration(const std::string& s);
std::string render_duration(std::chrono::milliseconds d);

}  // namespace radon
