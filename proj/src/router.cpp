#include "radon/router.hpp"

namespace radon {

Result<void> Router::send(const AtomName& from, const DestinationSelector& dest,
                          Ordering ordering, std::string payload) {
  if (payload.size() > kMaxPayloadBytes)
    return make_error(Errc::too_large,
                      "payload exceeds " + std::to_string(kMaxPayloadBytes) + " bytes");

  auto make_envelope = [&](const NameRecord& rec) {
    Envelope env;
    env.sender = from;
    env.destination = rec.name;
    env.ordering = ordering;
    env.payload = payload;
    env.dest_incarnation = rec.incarnation;
    return env;
  };

  if (const auto* exact = std::get_if<DestExact>(&dest)) {
    auto rec = registry_.lookup(exact->name);
    if (!rec)
      return make_error(Errc::unknown_destination,
                        "no live atom named '" + exact->name.str() + "'");
    stats_.sent.fetch_add(1, std::memory_order_relaxed);
    route(make_envelope(*rec));
    return {};
  }

  std::vector<AtomName> members;
  if (const auto* alias = std::get_if<DestAliasAll>(&dest)) {
    members = registry_.alias_members(alias->alias);
  } else {
    members = std::get<DestNameSet>(dest).names;
  }
  for (const auto& m : members) {
    auto rec = registry_.lookup(m);
    if (!rec) {
      stats_.unknown_drops.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    stats_.sent.fetch_add(1, std::memory_order_relaxed);
    route(make_envelope(*rec));
  }
  return {};
}

void Router::route(Envelope env) {
  auto rec = registry_.lookup(env.destination);
  if (!rec) {
    stats_.unknown_drops.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  if (rec->node == self_node_) {
    deliver_local(std::move(env));
    return;
  }
  if (!remote_) {
    stats_.wire_drops.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  if (auto r = remote_(rec->node, std::move(env)); !r)
    stats_.wire_drops.fetch_add(1, std::memory_order_relaxed);
}

void Router::deliver_local(Envelope env) {
  if (!local_) {
    stats_.unknown_drops.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  if (local_(std::move(env)))
    stats_.delivered.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace radon
