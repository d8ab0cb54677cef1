#pragma once

#include <stdexcept>
#include <utility>
#include <variant>

namespace vcan {

// Value-or-error return for operations whose failures are ordinary outcomes
// (decoding wire bits, parsing serial lines), not programming errors.
template <typename T, typename E>
class Result {
 public:
  Result(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  Result(E error) : storage_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error("Result::value() on error");
    return std::get<0>(storage_);
  }
  T&& value() && {
    if (!ok()) throw std::logic_error("Result::value() on error");
    return std::get<0>(std::move(storage_));
  }
  const E& error() const& {
    if (ok()) throw std::logic_error("Result::error() on value");
    return std::get<1>(storage_);
  }

 private:
  std::variant<T, E> storage_;
};

}  // namespace vcan
