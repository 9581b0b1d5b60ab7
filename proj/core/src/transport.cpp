#include "anatree/transport.hpp"

#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include "anatree/server.hpp"

namespace anatree {

WireMessage LocalTransport::round_trip(const WireMessage& request) {
    Bytes req_frame = frame(request);
    bytes_sent_ += req_frame.size();
    WireMessage response = server_.handle(unframe(req_frame));
    Bytes resp_frame = frame(response);
    bytes_received_ += resp_frame.size();
    return unframe(resp_frame);
}

namespace {

void write_all(int fd, const uint8_t* data, size_t len) {
    while (len > 0) {
        ssize_t n = ::send(fd, data, len, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
        }
        data += n;
        len -= static_cast<size_t>(n);
    }
}

bool read_all(int fd, uint8_t* data, size_t len) {
    while (len > 0) {
        ssize_t n = ::recv(fd, data, len, 0);
        if (n == 0) return false; // peer closed
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
        }
        data += n;
        len -= static_cast<size_t>(n);
    }
    return true;
}

// Reads one length-prefixed frame; empty result means the peer closed
// between frames.
Bytes read_frame(int fd) {
    uint8_t head[4];
    if (!read_all(fd, head, 4)) return {};
    uint32_t len = (uint32_t(head[0]) << 24) | (uint32_t(head[1]) << 16) |
                   (uint32_t(head[2]) << 8) | uint32_t(head[3]);
    constexpr uint32_t kMaxFrame = 256u * 1024 * 1024;
    if (len == 0 || len > kMaxFrame) throw ProtocolError("unreasonable frame length");
    Bytes buf(4 + len);
    std::memcpy(buf.data(), head, 4);
    if (!read_all(fd, buf.data() + 4, len)) throw ProtocolError("connection closed mid-frame");
    return buf;
}

} // namespace

TcpTransport::TcpTransport(const std::string& host, uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ProtocolError(std::string("socket failed: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        fd_ = -1;
        throw ConfigError("bad IPv4 address: " + host);
    }
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw ProtocolError(std::string("connect failed: ") + std::strerror(err));
    }
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpTransport::~TcpTransport() {
    if (fd_ >= 0) ::close(fd_);
}

WireMessage TcpTransport::round_trip(const WireMessage& request) {
    Bytes req_frame = frame(request);
    write_all(fd_, req_frame.data(), req_frame.size());
    bytes_sent_ += req_frame.size();
    Bytes resp_frame = read_frame(fd_);
    if (resp_frame.empty()) throw ProtocolError("server closed the connection");
    bytes_received_ += resp_frame.size();
    return unframe(resp_frame);
}

TcpListener::TcpListener(const std::string& bind_addr, uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ProtocolError(std::string("socket failed: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_addr.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        fd_ = -1;
        throw ConfigError("bad IPv4 address: " + bind_addr);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(fd_, 4) != 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw ProtocolError(std::string("bind/listen failed: ") + std::strerror(err));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

void TcpListener::serve(Server& server, const std::atomic<bool>& stop) {
    // Accept with a timeout so the stop flag is observed between clients.
    timeval tv{0, 200000};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    while (!stop) {
        int client = ::accept(fd_, nullptr, nullptr);
        if (client < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
            throw ProtocolError(std::string("accept failed: ") + std::strerror(errno));
        }
        int one = 1;
        ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        try {
            for (;;) {
                Bytes req_frame = read_frame(client);
                if (req_frame.empty()) break;
                WireMessage response = server.handle(unframe(req_frame));
                Bytes resp_frame = frame(response);
                write_all(client, resp_frame.data(), resp_frame.size());
            }
        } catch (const std::exception&) {
            // Drop the connection on a malformed stream; the listener lives on.
        }
        ::close(client);
    }
}

std::pair<std::string, uint16_t> parse_addr(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
        throw ConfigError("address must be host:port, got '" + addr + "'");
    std::string host = addr.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(addr.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad port in address '" + addr + "'");
    }
    if (port < 0 || port > 65535) throw ConfigError("port out of range in '" + addr + "'");
    return {host, static_cast<uint16_t>(port)};
}

} // namespace anatree
