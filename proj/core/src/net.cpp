#include "detrace/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <utility>

namespace detrace {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
    throw NetError(what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw NetError("bad IPv4 address \"" + host + "\"");
    }
    return addr;
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_addr(const std::string& addr) {
    std::size_t colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= addr.size()) {
        throw NetError("address must be host:port, got \"" + addr + "\"");
    }
    int port = 0;
    for (char c : addr.substr(colon + 1)) {
        if (c < '0' || c > '9') throw NetError("bad port in \"" + addr + "\"");
        port = port * 10 + (c - '0');
        if (port > 65535) throw NetError("port out of range in \"" + addr + "\"");
    }
    return {addr.substr(0, colon), static_cast<std::uint16_t>(port)};
}

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) {
    other.fd_ = -1;
}

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

TcpStream::~TcpStream() { close(); }

TcpStream TcpStream::connect(const std::string& host, std::uint16_t port,
                             int timeout_ms) {
    sockaddr_in addr = make_addr(host, port);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    TcpStream stream(fd);

    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (rc < 0) {
        if (errno != EINPROGRESS) sys_fail("connect");
        pollfd pfd{fd, POLLOUT, 0};
        rc = ::poll(&pfd, 1, timeout_ms);
        if (rc == 0) throw NetError("connect timed out");
        if (rc < 0) sys_fail("poll");
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            errno = err;
            sys_fail("connect");
        }
    }
    ::fcntl(fd, F_SETFL, flags);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return stream;
}

void TcpStream::write_all(std::string_view bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("send");
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::size_t TcpStream::read_some(char* buf, std::size_t len) {
    for (;;) {
        ssize_t n = ::recv(fd_, buf, len, 0);
        if (n >= 0) return static_cast<std::size_t>(n);
        if (errno == EINTR) continue;
        sys_fail("recv");
    }
}

void TcpStream::send_frame(std::string_view body) {
    write_all(encode_frame(body));
}

std::optional<std::string> TcpStream::recv_frame() {
    return read_frame([this](char* buf, std::size_t len) { return read_some(buf, len); });
}

void TcpStream::shutdown_read() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RD);
}

void TcpStream::shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpStream::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpListener::TcpListener(TcpListener&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), port_(other.port_) {}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
    if (this != &other) {
        shutdown();
        fd_ = std::exchange(other.fd_, -1);
        port_ = other.port_;
    }
    return *this;
}

TcpListener::~TcpListener() { shutdown(); }

TcpListener TcpListener::bind(const std::string& host, std::uint16_t port) {
    sockaddr_in addr = make_addr(host, port);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    TcpListener listener;
    listener.fd_ = fd;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        sys_fail("bind " + host + ":" + std::to_string(port));
    }
    if (::listen(fd, 128) < 0) sys_fail("listen");
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    listener.port_ = ntohs(bound.sin_port);
    return listener;
}

std::optional<TcpStream> TcpListener::accept() {
    for (;;) {
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd >= 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return TcpStream(fd);
        }
        if (errno == EINTR) continue;
        return std::nullopt;  // listener shut down or closed
    }
}

void TcpListener::interrupt() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpListener::shutdown() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

}  // namespace detrace
