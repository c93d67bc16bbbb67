// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qsim::wire {

/// Space-separated token codec for message bodies and trace details.
/// Integers are decimal tokens; strings are length-prefixed ("<len>:<bytes>")
/// so arbitrary bytes round-trip and the encoding stays byte-stable.
inline void put_u64(std::string& out, std::uint64_t v) {
  if (!out.empty()) out.push_back(' ');
  out += std::to_string(v);
}

inline void put_i64(std::string& out, std::int64_t v) {
  if (!out.empty()) out.push_back(' ');
  out += std::to_string(v);
}

inline void put_str(std::string& out, std::string_view s) {
  if (!out.empty()) out.push_back(' ');
  out += std::to_string(s.size());
  out.push_back(':');
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view body) : rest_(body) {}

  std::uint64_t u64() { return static_cast<std::uint64_t>(i64()); }

  std::int64_t i64() {
    skip_space();
    bool neg = !rest_.empty() && rest_.front() == '-';
    if (neg) rest_.remove_prefix(1);
    if (rest_.empty() || rest_.front() < '0' || rest_.front() > '9')
      throw std::invalid_argument("wire: expected integer");
    std::int64_t v = 0;
    while (!rest_.empty() && rest_.front() >= '0' && rest_.front() <= '9') {
      v = v * 10 + (rest_.front() - '0');
      rest_.remove_prefix(1);
    }
    return neg ? -v : v;
  }

  std::string str() {
    skip_space();
    std::size_t len = 0;
    while (!rest_.empty() && rest_.front() >= '0' && rest_.front() <= '9') {
      len = len * 10 + static_cast<std::size_t>(rest_.front() - '0');
      rest_.remove_prefix(1);
    }
    if (rest_.empty() || rest_.front() != ':')
      throw std::invalid_argument("wire: expected length-prefixed string");
    rest_.remove_prefix(1);
    if (rest_.size() < len)
      throw std::invalid_argument("wire: truncated string");
    std::string out(rest_.substr(0, len));
    rest_.remove_prefix(len);
    return out;
  }

  bool done() {
    skip_space();
    return rest_.empty();
  }

 private:
  void skip_space() {
    while (!rest_.empty() && rest_.front() == ' ') rest_.remove_prefix(1);
  }
  std::string_view rest_;
};

}  // namespace qsim::wire
