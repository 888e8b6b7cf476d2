#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "radon/result.hpp"

namespace radon {

// Lexical rules shared by explicit names and aliases: non-empty, at most 255
// bytes, characters restricted to [A-Za-z0-9._/-]. The 255-byte cap lets a
// name travel in wire frames behind a single length byte.
constexpr std::size_t kMaxNameBytes = 255;

bool name_char_ok(char c);
Result<void> check_name_lexical(std::string_view s);

/// Explicit atom name. Unique across the deployment while the instance lives.
class AtomName {
 public:
  AtomName() = default;

  static Result<AtomName> parse(std::string_view s);
  /// For strings the caller already validated (e.g. decoded from a frame the
  /// sender validated). Asserts in debug builds.
  static AtomName unchecked(std::string s);

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend bool operator==(const AtomName&, const AtomName&) = default;
  friend auto operator<=>(const AtomName&, const AtomName&) = default;

 private:
  explicit AtomName(std::string v) : value_(std::move(v)) {}
  std::string value_;
};

/// Alias: same lexical rules, separate namespace. Maps to a set of names.
class Alias {
 public:
  Alias() = default;

  static Result<Alias> parse(std::string_view s);
  static Alias unchecked(std::string s);

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend bool operator==(const Alias&, const Alias&) = default;
  friend auto operator<=>(const Alias&, const Alias&) = default;

 private:
  explicit Alias(std::string v) : value_(std::move(v)) {}
  std::string value_;
};

}  // namespace radon

template <>
struct std::hash<radon::AtomName> {
  std::size_t operator()(const radon::AtomName& n) const noexcept {
    return std::hash<std::string>{}(n.str());
  }
};

template <>
struct std::hash<radon::Alias> {
  std::size_t operator()(const radon::Alias& a) const noexcept {
    return std::hash<std::string>{}(a.str());
  }
};
