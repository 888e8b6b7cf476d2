#include "radon/wire.hpp"

#include <cstring>

namespace radon::wire {
namespace {

void put_u8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u16(std::string& out, uint16_t v) {
  put_u8(out, static_cast<uint8_t>(v >> 8));
  put_u8(out, static_cast<uint8_t>(v));
}

void put_u32(std::string& out, uint32_t v) {
  put_u16(out, static_cast<uint16_t>(v >> 16));
  put_u16(out, static_cast<uint16_t>(v));
}

void put_u64(std::string& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v >> 32));
  put_u32(out, static_cast<uint32_t>(v));
}

// Short fields (names, node ids, reasons) fit u16; anything longer is a
// caller bug surfaced at encode time.
bool put_str16(std::string& out, std::string_view s) {
  if (s.size() > 0xffff) return false;
  put_u16(out, static_cast<uint16_t>(s.size()));
  out.append(s);
  return true;
}

bool put_bytes32(std::string& out, std::string_view s) {
  if (s.size() > kMaxPayloadBytes) return false;
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.append(s);
  return true;
}

// Cursor with sticky failure; every read after a failure yields zeroes so
// decoders can run straight-line and check ok() once.
class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  uint8_t u8() {
    if (!need(1)) return 0;
    return static_cast<uint8_t>(in_[pos_++]);
  }
  uint16_t u16() {
    uint16_t hi = u8();
    return static_cast<uint16_t>(hi << 8 | u8());
  }
  uint32_t u32() {
    uint32_t hi = u16();
    return hi << 16 | u16();
  }
  uint64_t u64() {
    uint64_t hi = u32();
    return hi << 32 | u32();
  }
  std::string str16() { return take(u16()); }
  std::string bytes32() {
    uint32_t n = u32();
    if (n > kMaxPayloadBytes) {
      ok_ = false;
      return {};
    }
    return take(n);
  }

  bool ok() const { return ok_; }
  bool done() const { return ok_ && pos_ == in_.size(); }

 private:
  bool need(std::size_t n) {
    if (!ok_ || in_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    return true;
  }
  std::string take(std::size_t n) {
    if (!need(n)) return {};
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

constexpr uint8_t kRecordName = 0;
constexpr uint8_t kRecordAlias = 1;
constexpr std::size_t kMaxTags = 256;

bool encode_body(std::string& out, const Hello& h) {
  put_u8(out, h.status);
  put_u32(out, h.protocol_version);
  if (!put_str16(out, h.node_id)) return false;
  if (h.tags.size() > kMaxTags) return false;
  put_u16(out, static_cast<uint16_t>(h.tags.size()));
  for (const auto& t : h.tags)
    if (!put_str16(out, t)) return false;
  return put_str16(out, h.reason);
}

bool encode_body(std::string& out, const RegistryDelta& d) {
  bool alias = d.kind == RegistryDelta::Kind::AliasAdd ||
               d.kind == RegistryDelta::Kind::AliasRemove;
  put_u8(out, alias ? kRecordAlias : kRecordName);
  if (!put_str16(out, d.name)) return false;
  if (!put_str16(out, d.node_or_member)) return false;
  put_u64(out, d.incarnation);
  return true;
}

bool encode_body(std::string& out, const Envelope& e) {
  if (!put_str16(out, e.sender.str())) return false;
  if (!put_str16(out, e.destination.str())) return false;
  put_u8(out, static_cast<uint8_t>(e.ordering));
  put_u8(out, e.correlation_id ? 1 : 0);
  if (e.correlation_id)
    out.append(reinterpret_cast<const char*>(e.correlation_id->bytes.data()), 16);
  put_u64(out, e.dest_incarnation);
  return put_bytes32(out, e.payload);
}

bool encode_body(std::string& out, const SpawnRequest& r) {
  put_u64(out, r.request_id);
  return put_bytes32(out, r.config_doc);
}

bool encode_body(std::string& out, const SpawnReply& r) {
  put_u64(out, r.request_id);
  put_u8(out, r.ok ? 1 : 0);
  if (!put_str16(out, r.config_name)) return false;
  return put_str16(out, r.error);
}

bool encode_body(std::string&, const Ping&) { return true; }

Result<Frame> decode_hello(Reader& r) {
  Hello h;
  h.status = r.u8();
  h.protocol_version = r.u32();
  h.node_id = r.str16();
  uint16_t n = r.u16();
  if (n > kMaxTags) return make_error(Errc::protocol_error, "tag count");
  for (uint16_t i = 0; i < n; ++i) h.tags.push_back(r.str16());
  h.reason = r.str16();
  if (!r.done()) return make_error(Errc::protocol_error, "hello frame");
  return Frame{std::move(h)};
}

Result<Frame> decode_delta(Reader& r, bool deregister) {
  uint8_t record = r.u8();
  RegistryDelta d;
  d.name = r.str16();
  d.node_or_member = r.str16();
  d.incarnation = r.u64();
  if (!r.done()) return make_error(Errc::protocol_error, "delta frame");
  if (record == kRecordName)
    d.kind = deregister ? RegistryDelta::Kind::DeregisterName : RegistryDelta::Kind::RegisterName;
  else if (record == kRecordAlias)
    d.kind = deregister ? RegistryDelta::Kind::AliasRemove : RegistryDelta::Kind::AliasAdd;
  else
    return make_error(Errc::protocol_error, "delta record type");
  return Frame{std::move(d)};
}

Result<Frame> decode_envelope(Reader& r) {
  std::string sender = r.str16();
  std::string dest = r.str16();
  uint8_t ordering = r.u8();
  uint8_t has_corr = r.u8();
  std::optional<CorrelationId> corr;
  if (has_corr == 1) {
    CorrelationId c;
    for (auto& b : c.bytes) b = r.u8();
    corr = c;
  } else if (has_corr != 0) {
    return make_error(Errc::protocol_error, "correlation flag");
  }
  uint64_t inc = r.u64();
  std::string payload = r.bytes32();
  if (!r.done()) return make_error(Errc::protocol_error, "envelope frame");
  if (ordering > static_cast<uint8_t>(Ordering::Fifo))
    return make_error(Errc::protocol_error, "ordering");
  auto s = AtomName::parse(sender);
  if (!s) return make_error(Errc::protocol_error, "envelope sender");
  auto d = AtomName::parse(dest);
  if (!d) return make_error(Errc::protocol_error, "envelope destination");
  Envelope e;
  e.sender = std::move(*s);
  e.destination = std::move(*d);
  e.ordering = static_cast<Ordering>(ordering);
  e.payload = std::move(payload);
  e.correlation_id = corr;
  e.dest_incarnation = inc;
  return Frame{std::move(e)};
}

Result<Frame> decode_spawn_request(Reader& r) {
  SpawnRequest req;
  req.request_id = r.u64();
  req.config_doc = r.bytes32();
  if (!r.done()) return make_error(Errc::protocol_error, "spawn request frame");
  return Frame{std::move(req)};
}

Result<Frame> decode_spawn_reply(Reader& r) {
  SpawnReply rep;
  rep.request_id = r.u64();
  uint8_t ok = r.u8();
  if (ok > 1) return make_error(Errc::protocol_error, "spawn reply flag");
  rep.ok = ok == 1;
  rep.config_name = r.str16();
  rep.error = r.str16();
  if (!r.done()) return make_error(Errc::protocol_error, "spawn reply frame");
  return Frame{std::move(rep)};
}

}  // namespace

FrameKind frame_kind(const Frame& f) {
  struct V {
    FrameKind operator()(const Hello&) { return FrameKind::Hello; }
    FrameKind operator()(const RegistryDelta& d) {
      bool dereg = d.kind == RegistryDelta::Kind::DeregisterName ||
                   d.kind == RegistryDelta::Kind::AliasRemove;
      return dereg ? FrameKind::DeregisterDelta : FrameKind::RegisterDelta;
    }
    FrameKind operator()(const Envelope&) { return FrameKind::Envelope; }
    FrameKind operator()(const SpawnRequest&) { return FrameKind::SpawnRequest; }
    FrameKind operator()(const SpawnReply&) { return FrameKind::SpawnReply; }
    FrameKind operator()(const Ping&) { return FrameKind::Ping; }
  };
  return std::visit(V{}, f);
}

Result<std::string> encode_frame(const Frame& f) {
  std::string out;
  out.resize(kLengthPrefixBytes);  // patched below
  put_u8(out, static_cast<uint8_t>(frame_kind(f)));
  bool ok = std::visit([&out](const auto& body) { return encode_body(out, body); }, f);
  if (!ok) return make_error(Errc::too_large, "frame field over limit");
  std::size_t body_len = out.size() - kLengthPrefixBytes;
  if (body_len > kMaxFrameBytes) return make_error(Errc::too_large, "frame over limit");
  auto n = static_cast<uint32_t>(body_len);
  out[0] = static_cast<char>(n >> 24);
  out[1] = static_cast<char>(n >> 16);
  out[2] = static_cast<char>(n >> 8);
  out[3] = static_cast<char>(n);
  return out;
}

Result<Frame> decode_frame(std::string_view bytes) {
  if (bytes.empty()) return make_error(Errc::protocol_error, "empty frame");
  if (bytes.size() > kMaxFrameBytes) return make_error(Errc::protocol_error, "frame over limit");
  auto kind = static_cast<uint8_t>(bytes[0]);
  Reader r(bytes.substr(1));
  switch (static_cast<FrameKind>(kind)) {
    case FrameKind::Hello:
      return decode_hello(r);
    case FrameKind::RegisterDelta:
      return decode_delta(r, false);
    case FrameKind::DeregisterDelta:
      return decode_delta(r, true);
    case FrameKind::Envelope:
      return decode_envelope(r);
    case FrameKind::SpawnRequest:
      return decode_spawn_request(r);
    case FrameKind::SpawnReply:
      return decode_spawn_reply(r);
    case FrameKind::Ping:
      if (!r.done()) return make_error(Errc::protocol_error, "ping frame");
      return Frame{Ping{}};
  }
  return make_error(Errc::protocol_error, "unknown frame kind");
}

Result<uint32_t> decode_length_prefix(const uint8_t prefix[4]) {
  uint32_t n = static_cast<uint32_t>(prefix[0]) << 24 | static_cast<uint32_t>(prefix[1]) << 16 |
               static_cast<uint32_t>(prefix[2]) << 8 | static_cast<uint32_t>(prefix[3]);
  if (n == 0) return make_error(Errc::protocol_error, "zero length frame");
  if (n > kMaxFrameBytes) return make_error(Errc::protocol_error, "frame length over limit");
  return n;
}

}  // namespace radon::wire
