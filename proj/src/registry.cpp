#include "radon/registry.hpp"

#include <algorithm>
#include <regex>

namespace radon {

Registry::Registry(std::string self_node) : self_(std::move(self_node)) {}

void Registry::set_broadcast(BroadcastFn fn) {
  std::lock_guard lk(mu_);
  broadcast_ = std::move(fn);
}

void Registry::set_conflict_handler(ConflictFn fn) {
  std::lock_guard lk(mu_);
  on_conflict_ = std::move(fn);
}

Result<uint64_t> Registry::register_local(const AtomName& name) {
  RegistryDelta d;
  BroadcastFn bc;
  {
    std::lock_guard lk(mu_);
    auto it = live_.find(name.str());
    if (it != live_.end())
      return make_error(Errc::conflict, "name '" + name.str() + "' already live on node '" +
                                            it->second.node + "'");
    uint64_t inc = ++last_incarnation_[name.str()];
    live_[name.str()] = NameRecord{name, self_, inc};
    d = RegistryDelta{RegistryDelta::Kind::RegisterName, name.str(), self_, inc};
    bc = broadcast_;
  }
  if (bc) bc(d);
  return d.incarnation;
}

void Registry::deregister_local(const AtomName& name) {
  RegistryDelta d;
  BroadcastFn bc;
  {
    std::lock_guard lk(mu_);
    auto it = live_.find(name.str());
    if (it == live_.end() || it->second.node != self_) return;  // no-op
    d = RegistryDelta{RegistryDelta::Kind::DeregisterName, name.str(), self_,
                      it->second.incarnation};
    live_.erase(it);
    prune_alias_member_locked(name.str());
    bc = broadcast_;
  }
  if (bc) bc(d);
}

Result<std::vector<AtomName>> Registry::resolve(const std::string& query,
                                                NameSpace space) const {
  std::lock_guard lk(mu_);
  return resolve_locked(query, space);
}

Result<std::vector<AtomName>> Registry::resolve_locked(const std::string& query,
                                                       NameSpace space) const {
  std::regex re;
  try {
    re.assign(query, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    return make_error(Errc::invalid_regex, std::string("bad regex '") + query + "': " + e.what());
  }

  std::vector<AtomName> out;
  if (space == NameSpace::Names) {
    for (const auto& [n, rec] : live_)
      if (std::regex_match(n, re)) out.push_back(rec.name);
  } else {
    std::set<std::string> members;
    for (const auto& [alias, ms] : aliases_) {
      if (!std::regex_match(alias, re)) continue;
      for (const auto& m : ms)
        if (live_.count(m)) members.insert(m);  // invariant: members are live names
    }
    for (const auto& m : members) out.push_back(AtomName::unchecked(m));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<NameRecord> Registry::lookup(const AtomName& name) const {
  std::lock_guard lk(mu_);
  auto it = live_.find(name.str());
  if (it == live_.end()) return std::nullopt;
  return it->second;
}

bool Registry::is_live(const AtomName& name) const {
  std::lock_guard lk(mu_);
  return live_.count(name.str()) > 0;
}

Result<void> Registry::alias_add(const Alias& alias, const AtomName& member) {
  RegistryDelta d;
  BroadcastFn bc;
  {
    std::lock_guard lk(mu_);
    if (!live_.count(member.str()))
      return make_error(Errc::not_found,
                        "alias member '" + member.str() + "' is not a live name");
    aliases_[alias.str()].insert(member.str());
    d = RegistryDelta{RegistryDelta::Kind::AliasAdd, alias.str(), member.str(), 0};
    bc = broadcast_;
  }
  if (bc) bc(d);
  return {};
}

Result<void> Registry::alias_remove(const Alias& alias, const AtomName& member) {
  RegistryDelta d;
  BroadcastFn bc;
  {
    std::lock_guard lk(mu_);
    auto it = aliases_.find(alias.str());
    if (it != aliases_.end()) {
      it->second.erase(member.str());
      if (it->second.empty()) aliases_.erase(it);
    }
    d = RegistryDelta{RegistryDelta::Kind::AliasRemove, alias.str(), member.str(), 0};
    bc = broadcast_;
  }
  if (bc) bc(d);
  return {};
}

std::vector<AtomName> Registry::alias_members(const Alias& alias) const {
  std::lock_guard lk(mu_);
  std::vector<AtomName> out;
  auto it = aliases_.find(alias.str());
  if (it == aliases_.end()) return out;
  for (const auto& m : it->second)
    if (live_.count(m)) out.push_back(AtomName::unchecked(m));
  return out;
}

void Registry::apply_remote(const RegistryDelta& d) {
  ConflictFn conflict;
  AtomName lost;
  {
    std::lock_guard lk(mu_);
    switch (d.kind) {
      case RegistryDelta::Kind::RegisterName: {
        auto it = live_.find(d.name);
        if (it != live_.end() && it->second.node != d.node_or_member) {
          // Simultaneous registration on two nodes: lowest node id wins.
          if (d.node_or_member < it->second.node) {
            bool we_lost = it->second.node == self_;
            it->second =
                NameRecord{AtomName::unchecked(d.name), d.node_or_member, d.incarnation};
            if (we_lost && on_conflict_) {
              conflict = on_conflict_;
              lost = AtomName::unchecked(d.name);
            }
          }
          break;
        }
        live_[d.name] = NameRecord{AtomName::unchecked(d.name), d.node_or_member, d.incarnation};
        auto& last = last_incarnation_[d.name];
        last = std::max(last, d.incarnation);
        break;
      }
      case RegistryDelta::Kind::DeregisterName: {
        auto it = live_.find(d.name);
        // Only the owner's deregister removes the record; an older owner's
        // deregister must not kill a newer registration.
        if (it != live_.end() && it->second.node == d.node_or_member &&
            it->second.incarnation <= d.incarnation) {
          live_.erase(it);
          prune_alias_member_locked(d.name);
        }
        auto& last = last_incarnation_[d.name];
        last = std::max(last, d.incarnation);
        break;
      }
      case RegistryDelta::Kind::AliasAdd:
        // Accepted even if the member is not (yet) visible here; resolve
        // filters to live members and deregistration prunes.
        aliases_[d.name].insert(d.node_or_member);
        break;
      case RegistryDelta::Kind::AliasRemove: {
        auto it = aliases_.find(d.name);
        if (it != aliases_.end()) {
          it->second.erase(d.node_or_member);
          if (it->second.empty()) aliases_.erase(it);
        }
        break;
      }
    }
  }
  if (conflict) conflict(lost);
}

void Registry::purge_node(const std::string& node) {
  std::lock_guard lk(mu_);
  for (auto it = live_.begin(); it != live_.end();) {
    if (it->second.node == node) {
      prune_alias_member_locked(it->first);
      it = live_.erase(it);
    } else {
      ++it;
    }
  }
}

std::vector<RegistryDelta> Registry::snapshot_for_peer() const {
  std::lock_guard lk(mu_);
  std::vector<RegistryDelta> out;
  for (const auto& [n, rec] : live_)
    if (rec.node == self_)
      out.push_back(RegistryDelta{RegistryDelta::Kind::RegisterName, n, self_, rec.incarnation});
  for (const auto& [alias, ms] : aliases_)
    for (const auto& m : ms)
      out.push_back(RegistryDelta{RegistryDelta::Kind::AliasAdd, alias, m, 0});
  return out;
}

uint64_t Registry::snapshot_hash() const {
  std::lock_guard lk(mu_);
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= 0xff;
    h *= 0x100000001b3ull;
  };
  for (const auto& [n, rec] : live_) {
    mix(n);
    mix(rec.node);
    mix(std::to_string(rec.incarnation));
  }
  for (const auto& [alias, ms] : aliases_) {
    mix(alias);
    for (const auto& m : ms) mix(m);
  }
  return h;
}

std::vector<NameRecord> Registry::all_records() const {
  std::lock_guard lk(mu_);
  std::vector<NameRecord> out;
  out.reserve(live_.size());
  for (const auto& [_, rec] : live_) out.push_back(rec);
  return out;
}

void Registry::prune_alias_member_locked(const std::string& member) {
  for (auto it = aliases_.begin(); it != aliases_.end();) {
    it->second.erase(member);
    if (it->second.empty())
      it = aliases_.erase(it);
    else
      ++it;
  }
}

}  // namespace radon
