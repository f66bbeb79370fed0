#include "citsbed/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace citsbed {

class SimBus::Endpoint : public Transport {
 public:
  Endpoint(std::shared_ptr<SimBus> bus, double tx_power_dbm)
      : bus_(std::move(bus)), tx_power_dbm_(tx_power_dbm), inbox_(1024) {}

  void send(const Bytes& frame) override {
    if (!inbox_.closed()) bus_->deliver(this, frame);
  }
  std::optional<ReceivedFrame> receive(std::chrono::milliseconds timeout) override {
    return inbox_.pop(timeout);
  }
  void updatePosition(const GeoPosition& p) override {
    std::lock_guard lock(bus_->mutex_);
    position_ = p;
  }
  void close() override {
    if (inbox_.closed()) return;
    inbox_.close();
    bus_->detach(this);
  }
  ~Endpoint() override { close(); }

 private:
  friend class SimBus;
  std::shared_ptr<SimBus> bus_;
  double tx_power_dbm_;
  std::optional<GeoPosition> position_;  // guarded by bus mutex
  BoundedQueue<ReceivedFrame> inbox_;
};

SimBus::SimBus(LinkBudgetConfig link, PropagationModel model)
    : link_(link), model_(model), shadowing_(link.shadowing_sigma_db, link.rng_seed) {
  link_.validate();
  citsbed::validate(model_);
}

std::shared_ptr<Transport> SimBus::attach(double tx_power_dbm) {
  auto ep = std::make_shared<Endpoint>(shared_from_this(), tx_power_dbm);
  std::lock_guard lock(mutex_);
  endpoints_.push_back(ep.get());
  return ep;
}

void SimBus::detach(const Endpoint* ep) {
  std::lock_guard lock(mutex_);
  std::erase(endpoints_, ep);
}

void SimBus::deliver(const Endpoint* from, const Bytes& frame) {
  std::lock_guard lock(mutex_);
  if (!from->position_) return;
  LinkBudgetConfig link = link_;
  link.tx_power_dbm = from->tx_power_dbm_;
  for (Endpoint* ep : endpoints_) {
    if (ep == from || !ep->position_) continue;
    const double d = std::max(kMinLinkDistanceM, haversineDistance(*from->position_, *ep->position_));
    const PowerDbm p = receivedPowerDbm(d, link, model_, shadowing_.draw());
    // inboxes are bounded; a full inbox drops the frame rather than stalling the sender.
    // Pushing under the lock keeps a concurrent detach from freeing the endpoint.
    if (receptionDecision(p, link) == Reception::Received) ep->inbox_.tryPush(ReceivedFrame{frame, p.value});
  }
}

UdpTransport::UdpTransport(const std::string& group_port, const std::string& iface)
    : target_(net::parseEndpoint(group_port)) {
  socket_ = net::Socket(::socket(AF_INET, SOCK_DGRAM, 0));
  if (!socket_.valid()) throw net::NetError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEPORT, &one, sizeof(one));
  ::setsockopt(socket_.fd(), SOL_SOCKET, SO_BROADCAST, &one, sizeof(one));

  in_addr group{};
  if (::inet_pton(AF_INET, target_.host.c_str(), &group) != 1) {
    throw net::NetError("UDP transport needs a numeric IPv4 address, got '" + target_.host + "'");
  }
  in_addr local{};
  local.s_addr = htonl(INADDR_ANY);
  if (!iface.empty() && ::inet_pton(AF_INET, iface.c_str(), &local) != 1) {
    throw net::NetError("invalid interface address '" + iface + "'");
  }

  sockaddr_in bind_addr{};
  bind_addr.sin_family = AF_INET;
  bind_addr.sin_addr.s_addr = htonl(INADDR_ANY);
  bind_addr.sin_port = htons(target_.port);
  if (::bind(socket_.fd(), reinterpret_cast<sockaddr*>(&bind_addr), sizeof(bind_addr)) != 0) {
    throw net::NetError("bind UDP port " + std::to_string(target_.port) + ": " + std::strerror(errno));
  }

  if (IN_MULTICAST(ntohl(group.s_addr))) {
    ip_mreq mreq{};
    mreq.imr_multiaddr = group;
    mreq.imr_interface = local;
    if (::setsockopt(socket_.fd(), IPPROTO_IP, IP_ADD_MEMBERSHIP, &mreq, sizeof(mreq)) != 0) {
      throw net::NetError("join multicast group " + target_.host + ": " + std::strerror(errno));
    }
    ::setsockopt(socket_.fd(), IPPROTO_IP, IP_MULTICAST_IF, &local, sizeof(local));
    unsigned char loop = 1;
    ::setsockopt(socket_.fd(), IPPROTO_IP, IP_MULTICAST_LOOP, &loop, sizeof(loop));
  }

  sockaddr_in dest{};
  dest.sin_family = AF_INET;
  dest.sin_addr = group;
  dest.sin_port = htons(target_.port);
  dest_addr_.resize(sizeof(dest));
  std::memcpy(dest_addr_.data(), &dest, sizeof(dest));
}

UdpTransport::~UdpTransport() { close(); }

void UdpTransport::send(const Bytes& frame) {
  if (!socket_.valid()) return;
  ::sendto(socket_.fd(), frame.data(), frame.size(), 0, reinterpret_cast<const sockaddr*>(dest_addr_.data()),
           static_cast<socklen_t>(dest_addr_.size()));
}

std::optional<ReceivedFrame> UdpTransport::receive(std::chrono::milliseconds timeout) {
  if (!socket_.valid()) return std::nullopt;
  pollfd pfd{socket_.fd(), POLLIN, 0};
  if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0 || !(pfd.revents & POLLIN)) {
    return std::nullopt;
  }
  ReceivedFrame rx;
  rx.bytes.resize(65536);
  const ssize_t n = ::recv(socket_.fd(), rx.bytes.data(), rx.bytes.size(), 0);
  if (n <= 0) return std::nullopt;  // 0 after shutdown; an empty datagram is no frame either
  rx.bytes.resize(static_cast<size_t>(n));
  return rx;
}

void UdpTransport::close() { ::shutdown(socket_.fd(), SHUT_RDWR); }

TransportSpec parseTransportSpec(const std::string& text) {
  TransportSpec spec;
  if (text == "sim") return spec;
  if (!text.starts_with("udp:")) throw net::NetError("transport must be 'sim' or 'udp:<group:port>'");
  spec.kind = TransportSpec::Kind::Udp;
  std::string rest = text.substr(4);
  if (auto at = rest.find('@'); at != std::string::npos) {
    spec.iface = rest.substr(at + 1);
    rest.erase(at);
  }
  net::parseEndpoint(rest);
  spec.endpoint = rest;
  return spec;
}

}  // namespace citsbed
