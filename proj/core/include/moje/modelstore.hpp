#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "moje/error.hpp"
#include "moje/moje.hpp"

namespace moje {

class BundleError : public Error {
 public:
  enum class Kind { io, corrupt, version_mismatch, invariant_violation };

  BundleError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Canonical bundle text. Identical models produce identical bytes.
std::string serialize(const MojeModel& model);
/// Parses and fully re-validates a bundle; never repairs.
MojeModel deserialize(std::string_view text);

void save(const MojeModel& model, const std::filesystem::path& path);
MojeModel load(const std::filesystem::path& path);

/// Short hex id of the model content (experts + tau, not provenance).
std::string model_id(const MojeModel& model);

std::string sha256_hex(std::string_view data);

}  // namespace moje
