#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "citsbed/channel.hpp"
#include "citsbed/codec.hpp"
#include "citsbed/gnss.hpp"
#include "citsbed/net.hpp"

namespace citsbed {

struct ReceivedFrame {
  Bytes bytes;
  std::optional<double> p_rx_dbm;  // known only on the simulated bus
};

/// Frame transport used by the station runtime. send() and receive() may be
/// called concurrently from different threads.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Bytes& frame) = 0;
  virtual std::optional<ReceivedFrame> receive(std::chrono::milliseconds timeout) = 0;
  /// Sender position used by position-aware media; ignored elsewhere.
  virtual void updatePosition(const GeoPosition&) {}
  virtual void close() = 0;
};

/// In-process broadcast medium applying the link budget between attached
/// endpoints at their latest positions.
class SimBus : public std::enable_shared_from_this<SimBus> {
 public:
  SimBus(LinkBudgetConfig link, PropagationModel model);

  std::shared_ptr<Transport> attach(double tx_power_dbm);

 private:
  class Endpoint;
  void deliver(const Endpoint* from, const Bytes& frame);
  void detach(const Endpoint* ep);

  std::mutex mutex_;
  LinkBudgetConfig link_;
  PropagationModel model_;
  ShadowingSource shadowing_;
  std::vector<Endpoint*> endpoints_;
};

/// UDP datagrams on `group:port`. Multicast groups are joined (on `iface`
/// when given) with loopback enabled so co-located stations hear each other.
class UdpTransport : public Transport {
 public:
  explicit UdpTransport(const std::string& group_port, const std::string& iface = "");
  ~UdpTransport() override;

  void send(const Bytes& frame) override;
  std::optional<ReceivedFrame> receive(std::chrono::milliseconds timeout) override;
  void close() override;

 private:
  net::Socket socket_;
  net::Endpoint target_;
  std::vector<uint8_t> dest_addr_;  // sockaddr_in
};

/// Parses `sim` or `udp:<group:port>[@iface]`.
struct TransportSpec {
  enum class Kind { Sim, Udp } kind = Kind::Sim;
  std::string endpoint;
  std::string iface;
};
TransportSpec parseTransportSpec(const std::string& text);

}  // namespace citsbed
