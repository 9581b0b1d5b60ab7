#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "anatree/protocol.hpp"

namespace anatree {

class Server;

// One request, one response, per call. Implementations count bytes so the
// bench can report network cost even in in-process mode.
class Transport {
public:
    virtual ~Transport() = default;
    virtual WireMessage round_trip(const WireMessage& request) = 0;

    uint64_t bytes_sent() const { return bytes_sent_; }
    uint64_t bytes_received() const { return bytes_received_; }

protected:
    uint64_t bytes_sent_ = 0;
    uint64_t bytes_received_ = 0;
};

// In-process loopback: frames, unframes, and dispatches to a Server
// directly. Byte counters reflect the real encoded frame sizes.
class LocalTransport : public Transport {
public:
    explicit LocalTransport(Server& server) : server_(server) {}
    WireMessage round_trip(const WireMessage& request) override;

private:
    Server& server_;
};

// Blocking TCP client for the framed protocol.
class TcpTransport : public Transport {
public:
    TcpTransport(const std::string& host, uint16_t port);
    ~TcpTransport() override;
    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

    WireMessage round_trip(const WireMessage& request) override;

private:
    int fd_ = -1;
};

// Blocking accept loop serving one connection at a time; requests are
// handled serially, matching the server's single-writer model. Returns when
// `stop` becomes true (checked between connections).
class TcpListener {
public:
    explicit TcpListener(const std::string& bind_addr, uint16_t port);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    uint16_t port() const { return port_; }
    void serve(Server& server, const std::atomic<bool>& stop);

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

// "host:port" -> pair; throws ConfigError on malformed input.
std::pair<std::string, uint16_t> parse_addr(const std::string& addr);

} // namespace anatree
