#include "proxgate/registry.hpp"

#include <openssl/hmac.h>

#include <algorithm>

#include "proxgate/errors.hpp"

namespace proxgate::registry {

std::string DeviceSignature::to_hex() const { return proxgate::to_hex(bytes); }

std::optional<DeviceSignature> DeviceSignature::from_hex(std::string_view hex) {
  DeviceSignature sig;
  if (!proxgate::from_hex(hex, sig.bytes)) return std::nullopt;
  return sig;
}

SecretKey secret_from_hex(std::string_view hex) {
  SecretKey key{};
  if (!proxgate::from_hex(hex, key)) {
    raise(ErrorCode::InvalidConfig,
          "registry secret must be exactly 64 lowercase hex characters");
  }
  return key;
}

std::string_view group_name(DeviceGroup g) {
  return g == DeviceGroup::GroupOne ? "one" : "two";
}

std::optional<DeviceGroup> group_from_name(std::string_view name) {
  if (name == "one") return DeviceGroup::GroupOne;
  if (name == "two") return DeviceGroup::GroupTwo;
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> canonical_identifier_set(
    const DeviceIdentifiers& ids) {
  std::vector<std::pair<std::string, std::string>> pairs;

  auto add_builtin = [&pairs](std::string_view name, const std::string& value) {
    auto v = trim(value);
    if (!v.empty()) pairs.emplace_back(std::string(name), std::string(v));
  };
  add_builtin("uuid", ids.uuid);
  add_builtin("imei", ids.imei);
  add_builtin("device_id", ids.device_id);

  for (const auto& [name, value] : ids.extra) {
    auto n = trim(name);
    auto v = trim(value);
    if (n.empty() || v.empty()) {
      raise(ErrorCode::InvalidIdentifiers,
            "extra identifier entries need a non-empty name and value");
    }
    pairs.emplace_back(std::string(n), std::string(v));
  }

  if (pairs.size() < 2) {
    raise(ErrorCode::InvalidIdentifiers,
          "a device must present at least two non-empty identifiers");
  }

  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<std::uint8_t> canonical_encoding(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<std::uint8_t> out;
  auto put_u32 = [&out](std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
      out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  };
  auto put_str = [&](const std::string& s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  };

  put_u32(static_cast<std::uint32_t>(pairs.size()));
  for (const auto& [name, value] : pairs) {
    put_str(name);
    put_str(value);
  }
  return out;
}

DeviceSignature derive_signature(const DeviceIdentifiers& ids,
                                 const SecretKey& secret) {
  const auto encoding = canonical_encoding(canonical_identifier_set(ids));

  DeviceSignature sig;
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()),
           encoding.data(), encoding.size(), sig.bytes.data(), &len) == nullptr ||
      len != sig.bytes.size()) {
    raise(ErrorCode::IntegrityError, "HMAC-SHA256 failed");
  }
  return sig;
}

bool InMemoryProfileStore::insert(const DeviceProfile& profile) {
  return profiles_.emplace(profile.signature, profile).second;
}

std::optional<DeviceProfile> InMemoryProfileStore::get(
    const DeviceSignature& sig) {
  auto it = profiles_.find(sig);
  if (it == profiles_.end()) return std::nullopt;
  return it->second;
}

bool InMemoryProfileStore::set_signed_in(const DeviceSignature& sig,
                                         bool flag) {
  auto it = profiles_.find(sig);
  if (it == profiles_.end()) return false;
  it->second.signed_in = flag;
  return true;
}

std::vector<DeviceProfile> InMemoryProfileStore::list() {
  std::vector<DeviceProfile> out;
  out.reserve(profiles_.size());
  for (const auto& [_, p] : profiles_) out.push_back(p);
  return out;
}

DeviceProfile Registry::register_device(std::string display_name,
                                        DeviceIdentifiers identifiers,
                                        DeviceGroup group, UtcMillis now) {
  DeviceProfile profile;
  profile.signature = derive_signature(identifiers, secret_);
  profile.group = group;
  profile.display_name = std::move(display_name);
  profile.identifiers = std::move(identifiers);
  profile.registered_at_ms = now;
  profile.signed_in = false;

  std::lock_guard lock(mu_);
  if (!store_.insert(profile)) {
    raise(ErrorCode::AlreadyRegistered,
          "a device with signature " + profile.signature.to_hex() +
              " is already registered");
  }
  return profile;
}

DeviceProfile Registry::lookup(const DeviceSignature& sig) const {
  std::lock_guard lock(mu_);
  auto profile = store_.get(sig);
  if (!profile) {
    raise(ErrorCode::NotFound, "unknown device signature " + sig.to_hex());
  }
  return *profile;
}

void Registry::set_signed_in(const DeviceSignature& sig, bool flag) {
  std::lock_guard lock(mu_);
  if (!store_.set_signed_in(sig, flag)) {
    raise(ErrorCode::NotFound, "unknown device signature " + sig.to_hex());
  }
}

}  // namespace proxgate::registry
