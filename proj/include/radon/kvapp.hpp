#pragma once

#include "radon/engine.hpp"

namespace radon {

// Replicated KV application behaviors, shipped in every node binary:
//   coordinator  daemon, fixed name "coordinator"; owns the ring topology
//   kvnode       daemon, one ring member per instance; stores key replicas
//   kvfrontend   reactive; turns HTTP events into ring requests
//   echo         reactive; answers every event with the request body
GuestTask coordinator_main(AtomContext& ctx, std::optional<Event> initial);
GuestTask kvnode_main(AtomContext& ctx, std::optional<Event> initial);
GuestTask kvfrontend_main(AtomContext& ctx, std::optional<Event> initial);
GuestTask echo_main(AtomContext& ctx, std::optional<Event> initial);

// Registers all four definitions under the names above.
Result<void> register_kv_definitions(Engine& engine);

}  // namespace radon
