#include <doctest.h>

#include <random>
#include <unordered_set>

#include "proxgate/errors.hpp"
#include "proxgate/registry.hpp"

using namespace proxgate;
using namespace proxgate::registry;

namespace {

SecretKey test_secret() {
  SecretKey key{};
  for (std::size_t i = 0; i < key.size(); ++i) {
    key[i] = static_cast<std::uint8_t>(i * 7 + 1);
  }
  return key;
}

DeviceIdentifiers ids(std::string uuid, std::string imei) {
  DeviceIdentifiers d;
  d.uuid = std::move(uuid);
  d.imei = std::move(imei);
  return d;
}

}  // namespace

TEST_CASE("signature derivation is deterministic") {
  auto secret = test_secret();
  auto a = derive_signature(ids("watch-1", "356938035643809"), secret);
  auto b = derive_signature(ids("watch-1", "356938035643809"), secret);
  CHECK(a == b);
  CHECK(a.to_hex().size() == 64);
}

TEST_CASE("different secrets give different signatures") {
  auto secret2 = test_secret();
  secret2[0] ^= 0xff;
  auto a = derive_signature(ids("watch-1", "356938035643809"), test_secret());
  auto b = derive_signature(ids("watch-1", "356938035643809"), secret2);
  CHECK(a != b);
}

TEST_CASE("canonical encoding is injective under concatenation tricks") {
  // ("A","B") vs ("AB","") as raw pair sets: the length prefixes keep the
  // encodings apart even though the concatenated payloads agree.
  auto enc1 = canonical_encoding({{"imei", "B"}, {"uuid", "A"}});
  auto enc2 = canonical_encoding({{"imei", ""}, {"uuid", "AB"}});
  CHECK(enc1 != enc2);

  auto enc3 = canonical_encoding({{"uuid", "AB"}});
  CHECK(enc1 != enc3);

  // Same pairs, same encoding, regardless of how the sort got there.
  CHECK(canonical_encoding({{"a", "1"}, {"b", "2"}}) ==
        canonical_encoding({{"a", "1"}, {"b", "2"}}));
}

TEST_CASE("derived signatures differ for adjacent identifier sets") {
  auto secret = test_secret();
  auto a = derive_signature(ids("A", "B"), secret);
  auto b = derive_signature(ids("AB", "B"), secret);
  CHECK(a != b);
}

TEST_CASE("fewer than two identifiers is rejected") {
  auto secret = test_secret();
  CHECK_THROWS_WITH_AS(derive_signature(ids("only-uuid", ""), secret),
                       doctest::Contains("two non-empty identifiers"), Error);
  CHECK_THROWS_AS(derive_signature(ids("", ""), secret), Error);
  // whitespace-only values count as empty
  CHECK_THROWS_AS(derive_signature(ids("watch", "   "), secret), Error);

  try {
    derive_signature(ids("x", ""), secret);
    FAIL("expected InvalidIdentifiers");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidIdentifiers);
  }
}

TEST_CASE("extra identifiers participate and must be well formed") {
  auto secret = test_secret();
  DeviceIdentifiers d;
  d.extra = {{"mac", "aa:bb"}, {"serial", "s-1"}};
  auto sig = derive_signature(d, secret);

  DeviceIdentifiers d2 = d;
  d2.extra[1].second = "s-2";
  CHECK(sig != derive_signature(d2, secret));

  DeviceIdentifiers bad;
  bad.uuid = "u";
  bad.extra = {{"", "value"}};
  CHECK_THROWS_AS(derive_signature(bad, secret), Error);
}

TEST_CASE("collision scan over 100k random identifier sets") {
  auto secret = test_secret();
  std::mt19937_64 rng(20240901);
  std::unordered_set<std::string> seen;
  seen.reserve(200000);

  for (int i = 0; i < 100000; ++i) {
    DeviceIdentifiers d;
    d.uuid = "uuid-" + std::to_string(i);
    d.imei = std::to_string(rng());
    if (rng() % 3 == 0) d.device_id = std::to_string(rng());
    auto hex = derive_signature(d, secret).to_hex();
    auto [_, inserted] = seen.insert(hex);
    REQUIRE(inserted);
  }
  CHECK(seen.size() == 100000);
}

TEST_CASE("registration happy path and uniqueness") {
  InMemoryProfileStore store;
  Registry reg(test_secret(), store);

  auto profile = reg.register_device("Alice's watch", ids("u-alice", "i-alice"),
                                     DeviceGroup::GroupOne, 1000);
  CHECK(profile.group == DeviceGroup::GroupOne);
  CHECK(profile.signed_in == false);
  CHECK(profile.display_name == "Alice's watch");
  CHECK(profile.registered_at_ms == 1000);

  try {
    reg.register_device("clone", ids("u-alice", "i-alice"),
                        DeviceGroup::GroupTwo, 2000);
    FAIL("expected AlreadyRegistered");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AlreadyRegistered);
  }

  // the original profile is untouched by the failed attempt
  auto kept = reg.lookup(profile.signature);
  CHECK(kept.group == DeviceGroup::GroupOne);
  CHECK(kept.display_name == "Alice's watch");

  try {
    reg.register_device("bad", ids("solo", ""), DeviceGroup::GroupOne, 0);
    FAIL("expected InvalidIdentifiers");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidIdentifiers);
  }
}

TEST_CASE("lookup round trip and misses") {
  InMemoryProfileStore store;
  Registry reg(test_secret(), store);

  DeviceSignature zero{};
  try {
    reg.lookup(zero);
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }

  auto p = reg.register_device("w", ids("u1", "i1"), DeviceGroup::GroupTwo, 5);
  auto found = reg.lookup(p.signature);
  CHECK(found.signature == p.signature);
  CHECK(found.identifiers.uuid == "u1");
}

TEST_CASE("1000 registrations all resolvable") {
  InMemoryProfileStore store;
  Registry reg(test_secret(), store);

  std::vector<DeviceSignature> sigs;
  for (int i = 0; i < 1000; ++i) {
    auto p = reg.register_device(
        "dev-" + std::to_string(i),
        ids("uuid-" + std::to_string(i), "imei-" + std::to_string(i)),
        i % 2 ? DeviceGroup::GroupOne : DeviceGroup::GroupTwo, i);
    sigs.push_back(p.signature);
  }
  for (int i = 0; i < 1000; ++i) {
    CHECK(reg.lookup(sigs[i]).display_name == "dev-" + std::to_string(i));
  }
}

TEST_CASE("signed-in flag updates and errors") {
  InMemoryProfileStore store;
  Registry reg(test_secret(), store);
  auto p = reg.register_device("w", ids("u", "i"), DeviceGroup::GroupTwo, 0);

  reg.set_signed_in(p.signature, true);
  CHECK(reg.lookup(p.signature).signed_in == true);

  DeviceSignature unknown{};
  unknown.bytes.fill(0x42);
  try {
    reg.set_signed_in(unknown, true);
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }

  // 100 toggles land on the last write
  bool last = false;
  for (int i = 0; i < 100; ++i) {
    last = i % 3 == 0;
    reg.set_signed_in(p.signature, last);
  }
  CHECK(reg.lookup(p.signature).signed_in == last);
}

TEST_CASE("signature hex forces lowercase") {
  auto sig = derive_signature(ids("u", "i"), test_secret());
  auto hex = sig.to_hex();
  CHECK(DeviceSignature::from_hex(hex).has_value());

  auto upper = hex;
  upper[0] = static_cast<char>(std::toupper(upper[0]));
  if (upper != hex) {
    CHECK_FALSE(DeviceSignature::from_hex(upper).has_value());
  }
  CHECK_FALSE(DeviceSignature::from_hex(hex.substr(1)).has_value());
}

TEST_CASE("secret parsing") {
  std::string hex(64, 'a');
  CHECK_NOTHROW(secret_from_hex(hex));
  CHECK_THROWS_AS(secret_from_hex(hex.substr(2)), Error);
  std::string bad = hex;
  bad[3] = 'G';
  CHECK_THROWS_AS(secret_from_hex(bad), Error);
}
