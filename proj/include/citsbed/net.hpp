#pragma once

// Thin RAII wrappers over POSIX sockets shared by the LDM API, the gpsd
// client and the UDP transport.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace citsbed::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }

  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = other.release();
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void close();

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host;
  uint16_t port = 0;
};

/// Parses "host:port". Throws NetError on malformed input.
Endpoint parseEndpoint(const std::string& text);

/// Listening TCP socket on 0.0.0.0:port (port 0 = ephemeral). Throws NetError.
Socket listenTcp(uint16_t port);
uint16_t localPort(const Socket& s);

Socket connectTcp(const Endpoint& ep);

/// Writes the whole buffer. Returns false if the peer went away.
bool sendAll(int fd, const std::string& data);

/// Buffered newline-delimited reader over a stream socket.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}
  /// Next line without the trailing '\n' (and '\r'); nullopt on EOF or error.
  std::optional<std::string> next();

 private:
  int fd_;
  std::string buffer_;
};

}  // namespace citsbed::net
