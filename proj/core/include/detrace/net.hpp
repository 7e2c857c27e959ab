#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "detrace/wire.hpp"

namespace detrace {

class NetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// "host:port" -> pair; throws NetError on malformed input.
std::pair<std::string, std::uint16_t> parse_addr(const std::string& addr);

// Blocking TCP stream with frame helpers. Move-only RAII over the fd.
class TcpStream {
public:
    TcpStream() = default;
    explicit TcpStream(int fd) : fd_(fd) {}
    TcpStream(TcpStream&& other) noexcept;
    TcpStream& operator=(TcpStream&& other) noexcept;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;
    ~TcpStream();

    static TcpStream connect(const std::string& host, std::uint16_t port,
                             int timeout_ms);

    bool valid() const { return fd_ >= 0; }
    void write_all(std::string_view bytes);
    // Bytes read, 0 on EOF.
    std::size_t read_some(char* buf, std::size_t len);

    void send_frame(std::string_view body);
    std::optional<std::string> recv_frame();  // nullopt on clean EOF

    void shutdown_read();
    void shutdown_both();
    void close();

    int fd() const { return fd_; }

private:
    int fd_ = -1;
};

class TcpListener {
public:
    TcpListener() = default;
    TcpListener(TcpListener&& other) noexcept;
    TcpListener& operator=(TcpListener&& other) noexcept;
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;
    ~TcpListener();

    // Binds and listens; port 0 picks an ephemeral port.
    static TcpListener bind(const std::string& host, std::uint16_t port);

    std::uint16_t port() const { return port_; }
    // Accepted stream, or nullopt once shut down.
    std::optional<TcpStream> accept();
    // Unblocks pending accept() calls without closing the descriptor;
    // shutdown() also closes it.
    void interrupt();
    void shutdown();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace detrace
