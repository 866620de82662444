#pragma once

#include <stdexcept>
#include <string>

namespace omarl {

// Bad configuration value, unknown key, or inconsistent shapes at build time.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse (non-scalar backward root, joint scalar from dec, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or inconsistent dataset / checkpoint contents.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or blow-up detected during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace omarl
