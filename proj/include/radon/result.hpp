#pragma once

#include <cassert>
#include <string>
#include <utility>
#include <variant>

namespace radon {

enum class Errc {
  invalid_argument,
  invalid_name,
  invalid_regex,
  syntax_error,
  semantic_error,
  duplicate,
  not_found,
  unknown_destination,
  conflict,
  constraint_mismatch,
  too_large,
  overflow,
  timeout,
  stopped,
  io_error,
  protocol_error,
  unavailable,
};

const char* errc_name(Errc c);

struct Error {
  Errc code;
  std::string message;

  std::string to_string() const { return std::string(errc_name(code)) + ": " + message; }
};

inline Error make_error(Errc code, std::string message) {
  return Error{code, std::move(message)};
}

/// Minimal expected-like result carrier. Holds either a T or an Error.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::in_place_index<0>, std::move(value)) {}
  Result(Error err) : v_(std::in_place_index<1>, std::move(err)) {}

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() {
    assert(ok());
    return std::get<0>(v_);
  }
  const T& value() const {
    assert(ok());
    return std::get<0>(v_);
  }
  const Error& error() const {
    assert(!ok());
    return std::get<1>(v_);
  }

  T value_or(T fallback) const {
    return ok() ? std::get<0>(v_) : std::move(fallback);
  }

  T& operator*() { return value(); }
  const T& operator*() const { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, Error> v_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error err) : err_(std::move(err)), has_err_(true) {}

  bool ok() const { return !has_err_; }
  explicit operator bool() const { return ok(); }
  const Error& error() const {
    assert(has_err_);
    return err_;
  }

 private:
  Error err_{};
  bool has_err_ = false;
};

}  // namespace radon
