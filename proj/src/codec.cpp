#include "citsbed/codec.hpp"

#include <limits>

namespace citsbed {

namespace {

constexpr int32_t kMaxLatTenthUdeg = 900000000;
constexpr int32_t kMaxLonTenthUdeg = 1800000000;

class Writer {
 public:
  explicit Writer(size_t reserve) { out_.reserve(reserve); }

  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) {
    out_.push_back(static_cast<uint8_t>(v >> 8));
    out_.push_back(static_cast<uint8_t>(v));
  }
  void u32(uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<uint8_t>(v >> shift));
  }
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void bytes(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

// Bounds are checked by the callers before any read.
class Reader {
 public:
  explicit Reader(std::span<const uint8_t> in) : in_(in) {}

  uint8_t u8() { return in_[pos_++]; }
  uint16_t u16() {
    uint16_t v = static_cast<uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += 4;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  size_t position() const { return pos_; }
  size_t remaining() const { return in_.size() - pos_; }
  std::span<const uint8_t> rest() const { return in_.subspan(pos_); }

 private:
  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

void validateCoordinates(int32_t lat, int32_t lon) {
  if (lat < -kMaxLatTenthUdeg || lat > kMaxLatTenthUdeg) {
    throw CodecError(CodecErrorKind::Validation, "latitude out of range: " + std::to_string(lat));
  }
  if (lon < -kMaxLonTenthUdeg || lon > kMaxLonTenthUdeg) {
    throw CodecError(CodecErrorKind::Validation, "longitude out of range: " + std::to_string(lon));
  }
}

}  // namespace

void validateCam(const CamPayload& p) {
  if (p.message_id != kCamMessageId) {
    throw CodecError(CodecErrorKind::WrongType,
                     "message_id " + std::to_string(p.message_id) + " is not a CAM");
  }
  if (p.protocol_version != kCamProtocolVersion) {
    throw CodecError(CodecErrorKind::Validation,
                     "unsupported protocol_version " + std::to_string(p.protocol_version));
  }
  if (p.heading_tenth_deg > kMaxHeadingTenthDeg) {
    throw CodecError(CodecErrorKind::Validation,
                     "heading out of range: " + std::to_string(p.heading_tenth_deg));
  }
  validateCoordinates(p.latitude_tenth_udeg, p.longitude_tenth_udeg);
}

Bytes encodeCam(const CamPayload& p) {
  validateCam(p);
  Writer w(kCamEncodedSize);
  w.u8(p.protocol_version);
  w.u8(p.message_id);
  w.u32(p.station_id);
  w.u16(p.generation_delta_time);
  w.i32(p.latitude_tenth_udeg);
  w.i32(p.longitude_tenth_udeg);
  w.i32(p.altitude_cm);
  w.u16(p.speed_cmps);
  w.u16(p.heading_tenth_deg);
  w.u8(p.station_type);
  w.u8(0);  // reserved
  return w.take();
}

CamPayload decodeCam(std::span<const uint8_t> bytes) {
  if (bytes.size() != kCamEncodedSize) {
    throw CodecError(CodecErrorKind::Truncated, "CAM must be " + std::to_string(kCamEncodedSize) +
                                                    " bytes, got " + std::to_string(bytes.size()));
  }
  Reader r(bytes);
  CamPayload p;
  p.protocol_version = r.u8();
  p.message_id = r.u8();
  p.station_id = r.u32();
  p.generation_delta_time = r.u16();
  p.latitude_tenth_udeg = r.i32();
  p.longitude_tenth_udeg = r.i32();
  p.altitude_cm = r.i32();
  p.speed_cmps = r.u16();
  p.heading_tenth_deg = r.u16();
  p.station_type = r.u8();
  if (r.u8() != 0) {
    throw CodecError(CodecErrorKind::Validation, "reserved byte must be zero");
  }
  validateCam(p);
  return p;
}

Bytes encodeFrame(const Frame& f) {
  if (f.magic != kFrameMagic) {
    throw CodecError(CodecErrorKind::BadMagic, "frame magic must be 0x4753");
  }
  if (f.payload.size() > std::numeric_limits<uint16_t>::max()) {
    throw CodecError(CodecErrorKind::Validation, "payload too large for a frame");
  }
  validateCoordinates(f.source_lat_tenth_udeg, f.source_lon_tenth_udeg);
  Writer w(kFrameHeaderSize + f.payload.size());
  w.u16(f.magic);
  w.u8(f.frame_type);
  w.u32(f.source_station_id);
  w.i32(f.source_lat_tenth_udeg);
  w.i32(f.source_lon_tenth_udeg);
  w.u32(f.timestamp_ms);
  w.u16(f.btp_dest_port);
  w.u16(static_cast<uint16_t>(f.payload.size()));
  w.bytes(f.payload);
  return w.take();
}

Frame decodeFrame(std::span<const uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) {
    throw CodecError(CodecErrorKind::Truncated, "frame header needs " +
                                                    std::to_string(kFrameHeaderSize) + " bytes, got " +
                                                    std::to_string(bytes.size()));
  }
  Reader r(bytes);
  Frame f;
  f.magic = r.u16();
  if (f.magic != kFrameMagic) {
    throw CodecError(CodecErrorKind::BadMagic, "bad frame magic");
  }
  f.frame_type = r.u8();
  f.source_station_id = r.u32();
  f.source_lat_tenth_udeg = r.i32();
  f.source_lon_tenth_udeg = r.i32();
  f.timestamp_ms = r.u32();
  f.btp_dest_port = r.u16();
  const uint16_t payload_len = r.u16();
  if (payload_len > r.remaining()) {
    throw CodecError(CodecErrorKind::Truncated, "payload_len " + std::to_string(payload_len) +
                                                    " exceeds remaining " +
                                                    std::to_string(r.remaining()) + " bytes");
  }
  if (payload_len < r.remaining()) {
    throw CodecError(CodecErrorKind::LengthMismatch,
                     "payload_len " + std::to_string(payload_len) + " leaves " +
                         std::to_string(r.remaining() - payload_len) + " trailing bytes");
  }
  validateCoordinates(f.source_lat_tenth_udeg, f.source_lon_tenth_udeg);
  auto rest = r.rest();
  f.payload.assign(rest.begin(), rest.end());
  return f;
}

}  // namespace citsbed
