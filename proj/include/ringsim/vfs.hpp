#pragma once

// In-memory file system and socket table used by the host model. Results
// follow host-OS conventions: non-negative on success, -errno on failure.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ringsim/types.hpp"

namespace ringsim {

namespace open_flags {
inline constexpr std::uint32_t kRdOnly = 0;
inline constexpr std::uint32_t kWrOnly = 1;
inline constexpr std::uint32_t kRdWr = 2;
inline constexpr std::uint32_t kCreat = 0x40;
inline constexpr std::uint32_t kTrunc = 0x200;
inline constexpr std::uint32_t kAppend = 0x400;
}  // namespace open_flags

inline constexpr std::int32_t kAtFdCwd = -100;
/// Offset value meaning "use and advance the descriptor position".
inline constexpr std::uint64_t kCurrentPos = ~0ULL;

namespace file_mode {
inline constexpr std::uint32_t kReg = 0100000;
inline constexpr std::uint32_t kDir = 0040000;
inline constexpr std::uint32_t kFifo = 0010000;
inline constexpr std::uint32_t kSock = 0140000;
}  // namespace file_mode

struct StatxRecord {
    std::uint64_t size = 0;
    std::uint32_t block_size = 0;
    std::uint32_t mode = 0;

    static constexpr std::size_t kSize = 16;
    void encode(std::span<std::byte, kSize> out) const;
    static StatxRecord decode(std::span<const std::byte, kSize> in);
    bool operator==(const StatxRecord&) const = default;
};

struct SockAddr {
    std::uint16_t family = 2;
    std::uint16_t port = 0;
    std::uint32_t ip = 0;

    static constexpr std::size_t kSize = 8;
    void encode(std::span<std::byte, kSize> out) const;
    static SockAddr decode(std::span<const std::byte, kSize> in);
};

bool is_pseudo_path(std::string_view path);

enum class NodeKind : std::uint8_t { File, Dir, EchoFifo };

struct FsNode {
    NodeKind kind = NodeKind::File;
    std::vector<std::byte> data;
    std::uint32_t block_size = 4096;
    bool pseudo = false;
};

/// Inbound message scheduled on a virtual connection.
struct WireMessage {
    SimTime at = 0;
    std::vector<std::byte> bytes;
};

class VirtualFs {
public:
    VirtualFs();

    /// Lines of `path size block_size pseudo [fifo]`; a trailing '/' makes a
    /// directory. '#' starts a comment.
    static Result<VirtualFs> from_manifest(std::string_view text);

    Status add_file(const std::string& path, std::vector<std::byte> data, std::uint32_t block_size,
                    bool pseudo, NodeKind kind = NodeKind::File);
    Status add_dir(const std::string& path);

    // --- per-proxy descriptor operations ----------------------------------
    std::int32_t open(std::uint32_t proxy, const std::string& path, std::uint32_t flags);
    std::int32_t close(std::uint32_t proxy, std::int32_t fd);
    /// Bytes read, or -errno. May return fewer than `n`.
    std::int32_t read(std::uint32_t proxy, std::int32_t fd, std::uint64_t off, std::size_t n,
                      std::vector<std::byte>& out);
    std::int32_t write(std::uint32_t proxy, std::int32_t fd, std::uint64_t off,
                       std::span<const std::byte> bytes);
    std::int32_t sync(std::uint32_t proxy, std::int32_t fd);
    std::int32_t statx(const std::string& path, StatxRecord& out) const;
    std::int32_t unlink(const std::string& path);
    std::int32_t mkdir(const std::string& path);

    // --- sockets -------------------------------------------------------------
    std::int32_t socket(std::uint32_t proxy);
    std::int32_t bind(std::uint32_t proxy, std::int32_t fd, const SockAddr& addr);
    std::int32_t listen(std::uint32_t proxy, std::int32_t fd, std::uint32_t backlog);
    /// New connection fd, -EAGAIN when none has arrived by `now`.
    std::int32_t accept(std::uint32_t proxy, std::int32_t fd, SimTime now);
    /// Bytes received, -EAGAIN when nothing is available yet.
    std::int32_t recv(std::uint32_t proxy, std::int32_t fd, std::size_t n, SimTime now,
                      std::vector<std::byte>& out);
    std::int32_t send(std::uint32_t proxy, std::int32_t fd, std::span<const std::byte> bytes);
    /// Earliest future instant at which a blocked accept/recv could progress.
    std::optional<SimTime> next_arrival(SimTime now) const;

    /// Schedules an incoming connection on `port` carrying `messages`.
    void inject_connection(std::uint16_t port, SimTime at, std::vector<WireMessage> messages);

    /// Drops every descriptor of a proxy.
    void kill_proxy(std::uint32_t proxy);

    const FsNode* node(const std::string& path) const;
    std::optional<std::vector<std::byte>> file_bytes(const std::string& path) const;
    std::vector<std::vector<std::byte>> sent(std::uint32_t proxy) const;
    std::uint64_t digest() const;
    std::size_t open_fds(std::uint32_t proxy) const;
    bool is_connection(std::uint32_t proxy, std::int32_t fd) const;
    /// Overwrites file bytes in place (host-side tampering).
    bool poke(const std::string& path, std::size_t off, std::byte value);

private:
    struct Connection {
        SimTime at = 0;
        std::deque<WireMessage> inbound;
        std::size_t consumed = 0;  // bytes of inbound.front() already read
        std::vector<std::vector<std::byte>> outbound;
        bool accepted = false;
    };
    enum class FdKind : std::uint8_t { File, Socket, Listener, Conn };
    struct OpenFd {
        FdKind kind = FdKind::File;
        std::string path;
        std::uint64_t pos = 0;
        std::uint32_t flags = 0;
        std::uint16_t port = 0;
        bool listening = false;
        std::size_t conn = 0;
    };

    std::int32_t alloc_fd(std::uint32_t proxy, OpenFd f);
    OpenFd* fd_entry(std::uint32_t proxy, std::int32_t fd);
    bool parent_is_dir(const std::string& path) const;

    std::map<std::string, FsNode> nodes_;
    std::map<std::uint32_t, std::map<std::int32_t, OpenFd>> fds_;
    std::vector<Connection> conns_;
    std::map<std::uint16_t, std::vector<std::size_t>> pending_by_port_;
    std::map<std::uint16_t, std::pair<std::uint32_t, std::int32_t>> bound_;
};

}  // namespace ringsim
