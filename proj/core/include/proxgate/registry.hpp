#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "proxgate/common.hpp"

namespace proxgate::registry {

/// Hardware identifiers a device registers with. A device must present at
/// least two non-empty identifiers; whitespace-only values count as empty.
struct DeviceIdentifiers {
  std::string uuid;
  std::string imei;
  std::string device_id;
  std::vector<std::pair<std::string, std::string>> extra;
};

/// Keyed 32-byte digest broadcast by a device to identify itself.
struct DeviceSignature {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const DeviceSignature&) const = default;

  std::string to_hex() const;
  /// Parses 64 lowercase hex chars; anything else is rejected.
  static std::optional<DeviceSignature> from_hex(std::string_view hex);
};

using SecretKey = std::array<std::uint8_t, 32>;

/// Parses the registry secret from its 64-hex-char configuration form.
SecretKey secret_from_hex(std::string_view hex);

enum class DeviceGroup {
  GroupOne,  // data owner, the side being read from
  GroupTwo,  // data requester
};

std::string_view group_name(DeviceGroup g);
std::optional<DeviceGroup> group_from_name(std::string_view name);

struct DeviceProfile {
  DeviceSignature signature;
  DeviceGroup group = DeviceGroup::GroupOne;
  std::string display_name;
  DeviceIdentifiers identifiers;
  UtcMillis registered_at_ms = 0;
  bool signed_in = false;
};

/// Trimmed, name-sorted (name, value) pairs with empty entries dropped.
/// Throws InvalidIdentifiers when fewer than two identifiers remain or an
/// extra entry has a blank name or value.
std::vector<std::pair<std::string, std::string>> canonical_identifier_set(
    const DeviceIdentifiers& ids);

/// Length-prefixed serialization of a canonical identifier set. Injective:
/// no two distinct sets share an encoding, so signatures cannot collide by
/// concatenation tricks.
std::vector<std::uint8_t> canonical_encoding(
    const std::vector<std::pair<std::string, std::string>>& pairs);

/// HMAC-SHA256 of the canonical encoding under the registry secret.
DeviceSignature derive_signature(const DeviceIdentifiers& ids,
                                 const SecretKey& secret);

/// Persistence boundary for profiles. Implementations must be atomic per
/// call; the Registry serializes its own compound operations.
class ProfileStore {
 public:
  virtual ~ProfileStore() = default;

  /// Returns false when a profile with the same signature already exists.
  virtual bool insert(const DeviceProfile& profile) = 0;
  virtual std::optional<DeviceProfile> get(const DeviceSignature& sig) = 0;
  /// Returns false when the signature is unknown.
  virtual bool set_signed_in(const DeviceSignature& sig, bool flag) = 0;
  virtual std::vector<DeviceProfile> list() = 0;
};

class InMemoryProfileStore final : public ProfileStore {
 public:
  bool insert(const DeviceProfile& profile) override;
  std::optional<DeviceProfile> get(const DeviceSignature& sig) override;
  bool set_signed_in(const DeviceSignature& sig, bool flag) override;
  std::vector<DeviceProfile> list() override;

 private:
  std::map<DeviceSignature, DeviceProfile> profiles_;
};

/// Device registration and lookup. All operations are linearizable: a
/// single internal mutex serializes them, so concurrent callers never
/// observe a half-applied registration.
class Registry {
 public:
  Registry(SecretKey secret, ProfileStore& store)
      : secret_(secret), store_(store) {}

  DeviceProfile register_device(std::string display_name,
                                DeviceIdentifiers identifiers,
                                DeviceGroup group, UtcMillis now);

  DeviceProfile lookup(const DeviceSignature& sig) const;

  void set_signed_in(const DeviceSignature& sig, bool flag);

  DeviceSignature derive(const DeviceIdentifiers& ids) const {
    return derive_signature(ids, secret_);
  }

 private:
  SecretKey secret_;
  ProfileStore& store_;
  mutable std::mutex mu_;
};

}  // namespace proxgate::registry
