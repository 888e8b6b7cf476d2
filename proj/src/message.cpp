#include "radon/message.hpp"

#include <cstring>

namespace radon {

namespace {

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

bool get_u32(const std::string& in, std::size_t& off, uint32_t& v) {
  if (off + 4 > in.size()) return false;
  const auto* p = reinterpret_cast<const uint8_t*>(in.data() + off);
  v = (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
  off += 4;
  return true;
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out += s;
}

bool get_str(const std::string& in, std::size_t& off, std::string& s) {
  uint32_t n = 0;
  if (!get_u32(in, off, n)) return false;
  if (off + n > in.size()) return false;
  s.assign(in, off, n);
  off += n;
  return true;
}

}  // namespace

std::string CorrelationId::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(32);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::optional<CorrelationId> CorrelationId::from_hex(std::string_view s) {
  if (s.size() != 32) return std::nullopt;
  CorrelationId id;
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < 16; ++i) {
    int hi = nib(s[2 * i]), lo = nib(s[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    id.bytes[i] = static_cast<uint8_t>((hi << 4) | lo);
  }
  return id;
}

std::string encode_event_payload(const Event& ev) {
  std::string out;
  put_str(out, ev.method);
  put_str(out, ev.path);
  put_u32(out, static_cast<uint32_t>(ev.headers.size()));
  for (const auto& [k, v] : ev.headers) {
    put_str(out, k);
    put_str(out, v);
  }
  put_str(out, ev.body);
  return out;
}

std::optional<Event> decode_event_payload(const std::string& payload,
                                          const CorrelationId& corr) {
  Event ev;
  std::size_t off = 0;
  if (!get_str(payload, off, ev.method)) return std::nullopt;
  if (!get_str(payload, off, ev.path)) return std::nullopt;
  uint32_t nh = 0;
  if (!get_u32(payload, off, nh)) return std::nullopt;
  for (uint32_t i = 0; i < nh; ++i) {
    std::string k, v;
    if (!get_str(payload, off, k) || !get_str(payload, off, v)) return std::nullopt;
    ev.headers.emplace_back(std::move(k), std::move(v));
  }
  if (!get_str(payload, off, ev.body)) return std::nullopt;
  if (off != payload.size()) return std::nullopt;
  ev.correlation = corr;
  return ev;
}

bool is_event_envelope(const Envelope& env) {
  return env.sender.str() == kGatewaySender && env.correlation_id.has_value();
}

std::optional<Event> as_event(const Envelope& env) {
  if (!is_event_envelope(env)) return std::nullopt;
  return decode_event_payload(env.payload, *env.correlation_id);
}

}  // namespace radon
