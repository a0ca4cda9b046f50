#pragma once

#include <stdexcept>
#include <string>

namespace dispersive {

/// Raised when a field or stage value stops being finite. The solver treats
/// it as a blow-up signal rather than a crash.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A spectral state lost the conjugate symmetry of a real function.
class SymmetryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration or schema violation. `path()` is the dotted key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace dispersive
