#include "radon/registry.hpp"

#include <vector>

#include "doctest.h"

using namespace radon;

namespace {

AtomName nm(const char* s) { return AtomName::parse(s).value(); }
Alias al(const char* s) { return Alias::parse(s).value(); }

}  // namespace

TEST_CASE("register is unique while live and incarnations only grow") {
  Registry r("n1");
  auto first = r.register_local(nm("svc/a"));
  REQUIRE(first.ok());
  CHECK(first.value() == 1);

  auto dup = r.register_local(nm("svc/a"));
  REQUIRE(!dup.ok());
  CHECK(dup.error().code == Errc::conflict);

  r.deregister_local(nm("svc/a"));
  CHECK(!r.is_live(nm("svc/a")));
  auto again = r.register_local(nm("svc/a"));
  REQUIRE(again.ok());
  CHECK(again.value() == 2);  // reuse after release bumps the incarnation
}

TEST_CASE("deregister of a foreign or unknown name is a no-op") {
  Registry r("n1");
  r.apply_remote({RegistryDelta::Kind::RegisterName, "svc/x", "n2", 1});
  r.deregister_local(nm("svc/x"));  // owned by n2, must survive
  CHECK(r.is_live(nm("svc/x")));
  r.deregister_local(nm("never/registered"));
}

TEST_CASE("resolution is an anchored regex over the chosen namespace") {
  Registry r("n1");
  REQUIRE(r.register_local(nm("kv/n1/0")).ok());
  REQUIRE(r.register_local(nm("kv/n1/1")).ok());
  REQUIRE(r.register_local(nm("gw/n1")).ok());

  auto all = r.resolve(".*", NameSpace::Names);
  REQUIRE(all.ok());
  CHECK(all.value().size() == 3);

  auto kv = r.resolve("kv/.*", NameSpace::Names);
  REQUIRE(kv.ok());
  REQUIRE(kv.value().size() == 2);
  CHECK(kv.value()[0].str() == "kv/n1/0");
  CHECK(kv.value()[1].str() == "kv/n1/1");

  // Anchored: a substring match is not enough.
  auto sub = r.resolve("n1", NameSpace::Names);
  REQUIRE(sub.ok());
  CHECK(sub.value().empty());

  auto bad = r.resolve("(", NameSpace::Names);
  REQUIRE(!bad.ok());
  CHECK(bad.error().code == Errc::invalid_regex);
}

TEST_CASE("aliases require live members and prune on deregister") {
  Registry r("n1");
  REQUIRE(r.register_local(nm("w1")).ok());
  REQUIRE(r.register_local(nm("w2")).ok());

  CHECK(!r.alias_add(al("workers"), nm("ghost")).ok());
  REQUIRE(r.alias_add(al("workers"), nm("w1")).ok());
  REQUIRE(r.alias_add(al("workers"), nm("w2")).ok());

  auto members = r.alias_members(al("workers"));
  REQUIRE(members.size() == 2);

  auto via_resolve = r.resolve("workers", NameSpace::Aliases);
  REQUIRE(via_resolve.ok());
  CHECK(via_resolve.value().size() == 2);

  r.deregister_local(nm("w1"));
  CHECK(r.alias_members(al("workers")).size() == 1);

  REQUIRE(r.alias_remove(al("workers"), nm("w2")).ok());
  CHECK(r.alias_members(al("workers")).empty());
  CHECK(r.resolve(".*", NameSpace::Aliases).value().empty());
}

TEST_CASE("alias and name namespaces do not collide") {
  Registry r("n1");
  REQUIRE(r.register_local(nm("shared")).ok());
  REQUIRE(r.alias_add(al("shared"), nm("shared")).ok());
  CHECK(r.resolve("shared", NameSpace::Names).value().size() == 1);
  CHECK(r.resolve("shared", NameSpace::Aliases).value().size() == 1);
}

TEST_CASE("remote deltas apply and replay out of order safely") {
  Registry r("n1");
  r.apply_remote({RegistryDelta::Kind::RegisterName, "svc/x", "n2", 3});
  REQUIRE(r.lookup(nm("svc/x")).has_value());
  CHECK(r.lookup(nm("svc/x"))->incarnation == 3);

  // A deregister for an older incarnation of the same owner must not kill
  // the newer registration.
  r.apply_remote({RegistryDelta::Kind::DeregisterName, "svc/x", "n2", 2});
  CHECK(r.is_live(nm("svc/x")));

  r.apply_remote({RegistryDelta::Kind::DeregisterName, "svc/x", "n2", 3});
  CHECK(!r.is_live(nm("svc/x")));
}

TEST_CASE("simultaneous registration resolves to the lowest node id") {
  Registry r("n2");
  REQUIRE(r.register_local(nm("clash")).ok());

  std::vector<std::string> lost;
  r.set_conflict_handler([&](const AtomName& n) { lost.push_back(n.str()); });

  // A higher node id does not steal the name.
  r.apply_remote({RegistryDelta::Kind::RegisterName, "clash", "n3", 1});
  CHECK(r.lookup(nm("clash"))->node == "n2");
  CHECK(lost.empty());

  // A lower node id wins and our side is told it lost.
  r.apply_remote({RegistryDelta::Kind::RegisterName, "clash", "n1", 1});
  CHECK(r.lookup(nm("clash"))->node == "n1");
  REQUIRE(lost.size() == 1);
  CHECK(lost[0] == "clash");
}

TEST_CASE("broadcast captures every local mutation") {
  Registry r("n1");
  std::vector<RegistryDelta> seen;
  r.set_broadcast([&](const RegistryDelta& d) { seen.push_back(d); });

  REQUIRE(r.register_local(nm("a")).ok());
  REQUIRE(r.alias_add(al("g"), nm("a")).ok());
  REQUIRE(r.alias_remove(al("g"), nm("a")).ok());
  r.deregister_local(nm("a"));

  REQUIRE(seen.size() == 4);
  CHECK(seen[0].kind == RegistryDelta::Kind::RegisterName);
  CHECK(seen[0].incarnation == 1);
  CHECK(seen[1].kind == RegistryDelta::Kind::AliasAdd);
  CHECK(seen[2].kind == RegistryDelta::Kind::AliasRemove);
  CHECK(seen[3].kind == RegistryDelta::Kind::DeregisterName);
}

TEST_CASE("purge then snapshot reconverges two views") {
  Registry a("na");
  Registry b("nb");
  REQUIRE(a.register_local(nm("svc/a")).ok());
  REQUIRE(a.alias_add(al("svcs"), nm("svc/a")).ok());
  REQUIRE(b.register_local(nm("svc/b")).ok());

  // b had a stale view of na.
  b.apply_remote({RegistryDelta::Kind::RegisterName, "svc/old", "na", 1});

  b.purge_node("na");
  CHECK(!b.is_live(nm("svc/old")));
  for (const auto& d : a.snapshot_for_peer()) b.apply_remote(d);

  CHECK(b.is_live(nm("svc/a")));
  CHECK(b.alias_members(al("svcs")).size() == 1);

  for (const auto& d : b.snapshot_for_peer()) a.apply_remote(d);
  CHECK(a.snapshot_hash() == b.snapshot_hash());
}
