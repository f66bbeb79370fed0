#pragma once

// Wire formats for CAM payloads and the single-hop broadcast frame that
// carries them. Byte-level layout is documented in docs/wire-format.md.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace citsbed {

using Bytes = std::vector<uint8_t>;

enum class CodecErrorKind { Truncated, WrongType, Validation, BadMagic, LengthMismatch };

class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  CodecErrorKind kind() const { return kind_; }

 private:
  CodecErrorKind kind_;
};

inline constexpr uint8_t kCamProtocolVersion = 2;
inline constexpr uint8_t kCamMessageId = 2;
inline constexpr size_t kCamEncodedSize = 26;
inline constexpr uint16_t kMaxHeadingTenthDeg = 3599;

struct CamPayload {
  uint8_t protocol_version = kCamProtocolVersion;
  uint8_t message_id = kCamMessageId;
  uint32_t station_id = 0;
  uint16_t generation_delta_time = 0;  // ms, epoch_ms mod 65536
  int32_t latitude_tenth_udeg = 0;     // 0.1 micro-degree
  int32_t longitude_tenth_udeg = 0;
  int32_t altitude_cm = 0;
  uint16_t speed_cmps = 0;         // 0.01 m/s
  uint16_t heading_tenth_deg = 0;  // 0.1 degree, [0, 3599]
  uint8_t station_type = 0;

  bool operator==(const CamPayload&) const = default;
};

/// Throws CodecError(Validation) when a field is out of range.
void validateCam(const CamPayload& p);

Bytes encodeCam(const CamPayload& p);
CamPayload decodeCam(std::span<const uint8_t> bytes);

inline constexpr uint16_t kFrameMagic = 0x4753;  // "GS"
inline constexpr uint8_t kFrameTypeSingleHopBroadcast = 1;
inline constexpr size_t kFrameHeaderSize = 23;
inline constexpr uint16_t kBtpPortCam = 2001;

struct Frame {
  uint16_t magic = kFrameMagic;
  uint8_t frame_type = kFrameTypeSingleHopBroadcast;
  uint32_t source_station_id = 0;
  int32_t source_lat_tenth_udeg = 0;
  int32_t source_lon_tenth_udeg = 0;
  uint32_t timestamp_ms = 0;  // low 32 bits of epoch ms
  uint16_t btp_dest_port = kBtpPortCam;
  Bytes payload;

  bool operator==(const Frame&) const = default;
};

Bytes encodeFrame(const Frame& f);
Frame decodeFrame(std::span<const uint8_t> bytes);

}  // namespace citsbed
