#include "radon/kvmsg.hpp"

namespace radon {

namespace {

constexpr uint8_t kKindRequest = 1;
constexpr uint8_t kKindResponse = 2;
constexpr uint8_t kKindJoin = 3;
constexpr uint8_t kKindTopology = 4;
constexpr uint8_t kKindRingView = 5;

void put_u8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

void put_u32(std::string& out, uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>(v >> s));
}

void put_u64(std::string& out, uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<char>(v >> s));
}

void put_str16(std::string& out, std::string_view s) {
  put_u16(out, static_cast<uint16_t>(s.size()));
  out += s;
}

void put_bytes32(std::string& out, std::string_view s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out += s;
}

// Strict cursor: any short read turns the whole decode sticky-bad.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  uint8_t u8() {
    if (!need(1)) return 0;
    return static_cast<uint8_t>(data_[pos_++]);
  }
  uint16_t u16() {
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v = static_cast<uint16_t>((v << 8) | u8());
    return v;
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | u8();
    return v;
  }
  std::string str16() { return take(u16()); }
  std::string bytes32() { return take(u32()); }
  std::string take(std::size_t n) {
    if (!need(n)) return {};
    std::string out(data_.substr(pos_, n));
    pos_ += n;
    return out;
  }

  bool done() const { return ok_ && pos_ == data_.size(); }
  bool ok() const { return ok_; }

 private:
  bool need(std::size_t n) {
    if (!ok_ || data_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    return true;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

void put_correlation(std::string& out, const CorrelationId& c) {
  out.append(reinterpret_cast<const char*>(c.bytes.data()), c.bytes.size());
}

std::optional<CorrelationId> read_correlation(Reader& r) {
  std::string raw = r.take(16);
  if (!r.ok()) return std::nullopt;
  CorrelationId c;
  for (std::size_t i = 0; i < c.bytes.size(); ++i) c.bytes[i] = static_cast<uint8_t>(raw[i]);
  return c;
}

std::optional<AtomName> read_name(Reader& r) {
  std::string s = r.str16();
  if (!r.ok()) return std::nullopt;
  auto n = AtomName::parse(s);
  if (!n.ok()) return std::nullopt;
  return n.value();
}

}  // namespace

std::string encode_kv(const KvMessage& msg) {
  std::string out;
  if (const auto* req = std::get_if<KvRequest>(&msg)) {
    put_u8(out, kKindRequest);
    if (const auto* put = std::get_if<KvPut>(&req->op)) {
      put_u8(out, 0);
      put_str16(out, put->key);
      put_bytes32(out, put->value);
    } else {
      put_u8(out, 1);
      put_str16(out, std::get<KvGet>(req->op).key);
    }
    put_str16(out, req->reply_to.str());
    put_correlation(out, req->correlation);
    put_u16(out, req->hops);
    put_u16(out, req->written);
  } else if (const auto* res = std::get_if<KvResponse>(&msg)) {
    put_u8(out, kKindResponse);
    put_correlation(out, res->correlation);
    if (const auto* okv = std::get_if<KvOk>(&res->outcome)) {
      if (okv->value) {
        put_u8(out, 0);
        put_bytes32(out, *okv->value);
      } else {
        put_u8(out, 1);
      }
    } else if (std::holds_alternative<KvNotFound>(res->outcome)) {
      put_u8(out, 2);
    } else {
      put_u8(out, 3);
      put_str16(out, std::get<KvError>(res->outcome).text);
    }
  } else if (const auto* join = std::get_if<KvJoin>(&msg)) {
    put_u8(out, kKindJoin);
    put_str16(out, join->member.str());
  } else if (std::holds_alternative<KvTopology>(msg)) {
    put_u8(out, kKindTopology);
  } else {
    const auto& view = std::get<RingView>(msg);
    put_u8(out, kKindRingView);
    put_u64(out, view.version);
    put_u32(out, view.replication);
    put_u32(out, static_cast<uint32_t>(view.points.size()));
    for (const auto& p : view.points) {
      put_u64(out, p.hash);
      put_str16(out, p.member.str());
    }
  }
  return out;
}

std::optional<KvMessage> decode_kv(std::string_view payload) {
  Reader r(payload);
  switch (r.u8()) {
    case kKindRequest: {
      KvRequest req;
      uint8_t op = r.u8();
      if (op == 0) {
        KvPut put;
        put.key = r.str16();
        put.value = r.bytes32();
        req.op = std::move(put);
      } else if (op == 1) {
        KvGet get;
        get.key = r.str16();
        req.op = std::move(get);
      } else {
        return std::nullopt;
      }
      auto name = read_name(r);
      if (!name) return std::nullopt;
      req.reply_to = std::move(*name);
      auto corr = read_correlation(r);
      if (!corr) return std::nullopt;
      req.correlation = *corr;
      req.hops = r.u16();
      req.written = r.u16();
      if (!r.done()) return std::nullopt;
      return KvMessage{std::move(req)};
    }
    case kKindResponse: {
      KvResponse res;
      auto corr = read_correlation(r);
      if (!corr) return std::nullopt;
      res.correlation = *corr;
      switch (r.u8()) {
        case 0: res.outcome = KvOk{r.bytes32()}; break;
        case 1: res.outcome = KvOk{std::nullopt}; break;
        case 2: res.outcome = KvNotFound{}; break;
        case 3: res.outcome = KvError{r.str16()}; break;
        default: return std::nullopt;
      }
      if (!r.done()) return std::nullopt;
      return KvMessage{std::move(res)};
    }
    case kKindJoin: {
      auto name = read_name(r);
      if (!name || !r.done()) return std::nullopt;
      return KvMessage{KvJoin{std::move(*name)}};
    }
    case kKindTopology: {
      if (!r.done()) return std::nullopt;
      return KvMessage{KvTopology{}};
    }
    case kKindRingView: {
      RingView view;
      view.version = r.u64();
      view.replication = r.u32();
      uint32_t count = r.u32();
      if (!r.ok()) return std::nullopt;
      uint64_t prev_hash = 0;
      for (uint32_t i = 0; i < count; ++i) {
        RingPoint p;
        p.hash = r.u64();
        auto name = read_name(r);
        if (!name) return std::nullopt;
        p.member = std::move(*name);
        // Sorted + unique hashes is a RingView invariant; enforce on ingest.
        if (i > 0 && p.hash <= prev_hash) return std::nullopt;
        prev_hash = p.hash;
        view.points.push_back(std::move(p));
      }
      if (!r.done()) return std::nullopt;
      return KvMessage{std::move(view)};
    }
    default:
      return std::nullopt;
  }
}

}  // namespace radon
