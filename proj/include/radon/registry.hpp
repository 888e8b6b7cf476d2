#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "radon/names.hpp"
#include "radon/result.hpp"

namespace radon {

enum class NameSpace { Names, Aliases };

struct NameRecord {
  AtomName name;
  std::string node;
  uint64_t incarnation = 0;
};

/// One registry state change, as propagated between nodes. Name records and
/// alias memberships both travel as register/deregister deltas.
struct RegistryDelta {
  enum class Kind : uint8_t {
    RegisterName = 0,
    DeregisterName = 1,
    AliasAdd = 2,
    AliasRemove = 3,
  };
  Kind kind = Kind::RegisterName;
  std::string name;            // atom name, or alias for Alias* kinds
  std::string node_or_member;  // owning node, or member name for Alias* kinds
  uint64_t incarnation = 0;    // 0 for alias deltas
};

/// Deployment-wide name view, fully replicated per node. Writes for names
/// hosted on this node are owner-authoritative and handed to the broadcast
/// hook; deltas from peers are applied via apply_remote.
class Registry {
 public:
  using BroadcastFn = std::function<void(const RegistryDelta&)>;
  using ConflictFn = std::function<void(const AtomName&)>;

  explicit Registry(std::string self_node);

  void set_broadcast(BroadcastFn fn);
  /// Invoked when a locally owned registration loses a simultaneous-
  /// registration conflict (lowest node id wins).
  void set_conflict_handler(ConflictFn fn);

  /// Registers a locally hosted instance. Errors if the name is live
  /// anywhere in the current view. Returns the new incarnation.
  Result<uint64_t> register_local(const AtomName& name);
  /// Removes a locally hosted instance; double deregister is a no-op.
  void deregister_local(const AtomName& name);

  /// Anchored regex resolution over the chosen namespace; results sorted.
  Result<std::vector<AtomName>> resolve(const std::string& query, NameSpace space) const;

  std::optional<NameRecord> lookup(const AtomName& name) const;
  bool is_live(const AtomName& name) const;

  /// Guest-facing alias management. Adding requires a live member.
  Result<void> alias_add(const Alias& alias, const AtomName& member);
  Result<void> alias_remove(const Alias& alias, const AtomName& member);
  /// Live members of one alias (stale members filtered out); empty if none.
  std::vector<AtomName> alias_members(const Alias& alias) const;

  // --- transport integration ---
  void apply_remote(const RegistryDelta& d);
  /// Drops every name record owned by `node`; called when a peer (re)connects
  /// just before its fresh snapshot is applied.
  void purge_node(const std::string& node);
  /// Records this node must (re)announce to a connecting peer: locally owned
  /// names plus all alias memberships known here.
  std::vector<RegistryDelta> snapshot_for_peer() const;
  /// Order-independent digest of the full view, for convergence checks.
  uint64_t snapshot_hash() const;

  std::vector<NameRecord> all_records() const;

 private:
  Result<std::vector<AtomName>> resolve_locked(const std::string& query, NameSpace space) const;
  void prune_alias_member_locked(const std::string& member);

  mutable std::mutex mu_;
  std::string self_;
  std::map<std::string, NameRecord> live_;            // name -> record
  std::map<std::string, uint64_t> last_incarnation_;  // survives deregister
  std::map<std::string, std::set<std::string>> aliases_;
  BroadcastFn broadcast_;
  ConflictFn on_conflict_;
};

}  // namespace radon
