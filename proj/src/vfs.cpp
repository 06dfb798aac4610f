#include "ringsim/vfs.hpp"

#include <sstream>

#include "ringsim/util.hpp"

namespace ringsim {

using namespace errno_code;

void StatxRecord::encode(std::span<std::byte, kSize> out) const {
    store_le(out, 0, size, 8);
    store_le(out, 8, block_size, 4);
    store_le(out, 12, mode, 4);
}

StatxRecord StatxRecord::decode(std::span<const std::byte, kSize> in) {
    return {load_le(in, 0, 8), static_cast<std::uint32_t>(load_le(in, 8, 4)),
            static_cast<std::uint32_t>(load_le(in, 12, 4))};
}

void SockAddr::encode(std::span<std::byte, kSize> out) const {
    store_le(out, 0, family, 2);
    store_le(out, 2, port, 2);
    store_le(out, 4, ip, 4);
}

SockAddr SockAddr::decode(std::span<const std::byte, kSize> in) {
    return {static_cast<std::uint16_t>(load_le(in, 0, 2)), static_cast<std::uint16_t>(load_le(in, 2, 2)),
            static_cast<std::uint32_t>(load_le(in, 4, 4))};
}

bool is_pseudo_path(std::string_view path) {
    return path.starts_with("/dev/") || path.starts_with("/proc/");
}

namespace {
std::string parent_of(const std::string& path) {
    const auto slash = path.find_last_of('/');
    if (slash == std::string::npos || slash == 0) return "/";
    return path.substr(0, slash);
}
}  // namespace

VirtualFs::VirtualFs() { nodes_["/"] = FsNode{NodeKind::Dir, {}, 4096, false}; }

bool VirtualFs::parent_is_dir(const std::string& path) const {
    auto it = nodes_.find(parent_of(path));
    return it != nodes_.end() && it->second.kind == NodeKind::Dir;
}

Status VirtualFs::add_dir(const std::string& path) {
    if (path.empty() || path[0] != '/') return Err{Errc::InvalidArgument};
    if (nodes_.contains(path)) return {};
    if (!parent_is_dir(path)) {
        auto st = add_dir(parent_of(path));
        if (!st.ok()) return st;
    }
    nodes_[path] = FsNode{NodeKind::Dir, {}, 4096, is_pseudo_path(path + "/")};
    return {};
}

Status VirtualFs::add_file(const std::string& path, std::vector<std::byte> data,
                           std::uint32_t block_size, bool pseudo, NodeKind kind) {
    if (path.empty() || path[0] != '/' || path.back() == '/') return Err{Errc::InvalidArgument};
    if (block_size == 0) return Err{Errc::InvalidArgument};
    auto st = add_dir(parent_of(path));
    if (!st.ok()) return st;
    nodes_[path] = FsNode{kind, std::move(data), block_size, pseudo || is_pseudo_path(path)};
    return {};
}

Result<VirtualFs> VirtualFs::from_manifest(std::string_view text) {
    VirtualFs fs;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string path;
        if (!(ls >> path)) continue;
        if (path.back() == '/') {
            std::string trimmed = path.substr(0, path.size() - 1);
            if (trimmed.empty()) continue;
            if (!fs.add_dir(trimmed).ok()) return Err{Errc::InvalidArgument};
            continue;
        }
        std::size_t size = 0;
        std::uint32_t bs = 4096;
        int pseudo = 0;
        std::string kind;
        if (!(ls >> size >> bs >> pseudo)) return Err{Errc::InvalidArgument};
        ls >> kind;
        std::vector<std::byte> data(size);
        // Deterministic content so reads are checkable.
        for (std::size_t i = 0; i < size; ++i) data[i] = std::byte((i * 131 + path.size()) & 0xff);
        const NodeKind nk = kind == "fifo" ? NodeKind::EchoFifo : NodeKind::File;
        if (nk == NodeKind::EchoFifo) data.clear();
        if (!fs.add_file(path, std::move(data), bs, pseudo != 0, nk).ok()) return Err{Errc::InvalidArgument};
    }
    return fs;
}

std::int32_t VirtualFs::alloc_fd(std::uint32_t proxy, OpenFd f) {
    auto& table = fds_[proxy];
    std::int32_t fd = 3;
    for (const auto& [n, e] : table) {
        if (n != fd) break;
        ++fd;
    }
    table.emplace(fd, std::move(f));
    return fd;
}

VirtualFs::OpenFd* VirtualFs::fd_entry(std::uint32_t proxy, std::int32_t fd) {
    auto t = fds_.find(proxy);
    if (t == fds_.end()) return nullptr;
    auto it = t->second.find(fd);
    return it == t->second.end() ? nullptr : &it->second;
}

std::int32_t VirtualFs::open(std::uint32_t proxy, const std::string& path, std::uint32_t flags) {
    if (path.empty() || path[0] != '/') return -kEINVAL;
    auto it = nodes_.find(path);
    const std::uint32_t acc = flags & 3;
    if (it == nodes_.end()) {
        if (!(flags & open_flags::kCreat)) return -kENOENT;
        if (!parent_is_dir(path)) return -kENOENT;
        it = nodes_.emplace(path, FsNode{NodeKind::File, {}, 4096, is_pseudo_path(path)}).first;
    } else if (it->second.kind == NodeKind::Dir && acc != open_flags::kRdOnly) {
        return -kEISDIR;
    }
    if ((flags & open_flags::kTrunc) && it->second.kind == NodeKind::File && acc != open_flags::kRdOnly)
        it->second.data.clear();
    OpenFd f;
    f.kind = FdKind::File;
    f.path = path;
    f.flags = flags;
    return alloc_fd(proxy, std::move(f));
}

std::int32_t VirtualFs::close(std::uint32_t proxy, std::int32_t fd) {
    auto t = fds_.find(proxy);
    if (t == fds_.end() || !t->second.erase(fd)) return -kEBADF;
    return 0;
}

std::int32_t VirtualFs::read(std::uint32_t proxy, std::int32_t fd, std::uint64_t off, std::size_t n,
                             std::vector<std::byte>& out) {
    out.clear();
    OpenFd* f = fd_entry(proxy, fd);
    if (!f) return -kEBADF;
    if (f->kind == FdKind::Conn) return -kEINVAL;
    if (f->kind != FdKind::File) return -kENOTCONN;
    if ((f->flags & 3) == open_flags::kWrOnly) return -kEBADF;
    auto it = nodes_.find(f->path);
    if (it == nodes_.end()) return -kEBADF;
    FsNode& node = it->second;
    if (node.kind == NodeKind::Dir) return -kEISDIR;
    if (node.kind == NodeKind::EchoFifo) {
        if (node.data.empty()) return -kEAGAIN;
        const std::size_t k = std::min(n, node.data.size());
        out.assign(node.data.begin(), node.data.begin() + static_cast<std::ptrdiff_t>(k));
        node.data.erase(node.data.begin(), node.data.begin() + static_cast<std::ptrdiff_t>(k));
        return static_cast<std::int32_t>(k);
    }
    const bool use_pos = off == kCurrentPos;
    const std::uint64_t at = use_pos ? f->pos : off;
    if (at >= node.data.size()) return 0;
    const std::size_t k = std::min<std::size_t>(n, node.data.size() - at);
    out.assign(node.data.begin() + static_cast<std::ptrdiff_t>(at),
               node.data.begin() + static_cast<std::ptrdiff_t>(at + k));
    if (use_pos) f->pos = at + k;
    return static_cast<std::int32_t>(k);
}

std::int32_t VirtualFs::write(std::uint32_t proxy, std::int32_t fd, std::uint64_t off,
                              std::span<const std::byte> bytes) {
    OpenFd* f = fd_entry(proxy, fd);
    if (!f) return -kEBADF;
    if (f->kind != FdKind::File) return -kEINVAL;
    if ((f->flags & 3) == open_flags::kRdOnly) return -kEBADF;
    auto it = nodes_.find(f->path);
    if (it == nodes_.end()) return -kEBADF;
    FsNode& node = it->second;
    if (node.kind == NodeKind::Dir) return -kEISDIR;
    if (node.kind == NodeKind::EchoFifo) {
        node.data.insert(node.data.end(), bytes.begin(), bytes.end());
        return static_cast<std::int32_t>(bytes.size());
    }
    const bool use_pos = off == kCurrentPos;
    std::uint64_t at = use_pos ? f->pos : off;
    if (f->flags & open_flags::kAppend) at = node.data.size();
    if (at > (1ULL << 31)) return -kEINVAL;
    if (node.data.size() < at + bytes.size()) node.data.resize(at + bytes.size());
    std::copy(bytes.begin(), bytes.end(), node.data.begin() + static_cast<std::ptrdiff_t>(at));
    if (use_pos || (f->flags & open_flags::kAppend)) f->pos = at + bytes.size();
    return static_cast<std::int32_t>(bytes.size());
}

std::int32_t VirtualFs::sync(std::uint32_t proxy, std::int32_t fd) {
    return fd_entry(proxy, fd) ? 0 : -kEBADF;
}

std::int32_t VirtualFs::statx(const std::string& path, StatxRecord& out) const {
    auto it = nodes_.find(path);
    if (it == nodes_.end()) return -kENOENT;
    const FsNode& n = it->second;
    out.size = n.data.size();
    out.block_size = n.block_size;
    out.mode = n.kind == NodeKind::Dir ? file_mode::kDir
               : n.kind == NodeKind::EchoFifo ? file_mode::kFifo
                                              : file_mode::kReg;
    return 0;
}

std::int32_t VirtualFs::unlink(const std::string& path) {
    auto it = nodes_.find(path);
    if (it == nodes_.end()) return -kENOENT;
    if (it->second.kind == NodeKind::Dir) return -kEISDIR;
    nodes_.erase(it);
    return 0;
}

std::int32_t VirtualFs::mkdir(const std::string& path) {
    if (path.empty() || path[0] != '/') return -kEINVAL;
    if (nodes_.contains(path)) return -kEEXIST;
    if (!parent_is_dir(path)) return -kENOENT;
    nodes_[path] = FsNode{NodeKind::Dir, {}, 4096, is_pseudo_path(path + "/")};
    return 0;
}

std::int32_t VirtualFs::socket(std::uint32_t proxy) {
    OpenFd f;
    f.kind = FdKind::Socket;
    return alloc_fd(proxy, std::move(f));
}

std::int32_t VirtualFs::bind(std::uint32_t proxy, std::int32_t fd, const SockAddr& addr) {
    OpenFd* f = fd_entry(proxy, fd);
    if (!f) return -kEBADF;
    if (f->kind != FdKind::Socket || f->port != 0) return -kEINVAL;
    if (bound_.contains(addr.port)) return -kEADDRINUSE;
    bound_[addr.port] = {proxy, fd};
    f->port = addr.port;
    return 0;
}

std::int32_t VirtualFs::listen(std::uint32_t proxy, std::int32_t fd, std::uint32_t /*backlog*/) {
    OpenFd* f = fd_entry(proxy, fd);
    if (!f) return -kEBADF;
    if (f->kind != FdKind::Socket || f->port == 0) return -kEINVAL;
    f->kind = FdKind::Listener;
    return 0;
}

std::int32_t VirtualFs::accept(std::uint32_t proxy, std::int32_t fd, SimTime now) {
    OpenFd* f = fd_entry(proxy, fd);
    if (!f) return -kEBADF;
    if (f->kind != FdKind::Listener) return -kEINVAL;
    auto pending = pending_by_port_.find(f->port);
    if (pending == pending_by_port_.end()) return -kEAGAIN;
    for (std::size_t idx : pending->second) {
        Connection& c = conns_[idx];
        if (c.accepted || c.at > now) continue;
        c.accepted = true;
        OpenFd nf;
        nf.kind = FdKind::Conn;
        nf.conn = idx;
        return alloc_fd(proxy, std::move(nf));
    }
    return -kEAGAIN;
}

std::int32_t VirtualFs::recv(std::uint32_t proxy, std::int32_t fd, std::size_t n, SimTime now,
                             std::vector<std::byte>& out) {
    out.clear();
    OpenFd* f = fd_entry(proxy, fd);
    if (!f) return -kEBADF;
    if (f->kind != FdKind::Conn) return -kENOTCONN;
    Connection& c = conns_[f->conn];
    if (c.inbound.empty() || c.inbound.front().at > now) return -kEAGAIN;
    auto& msg = c.inbound.front();
    const std::size_t k = std::min(n, msg.bytes.size() - c.consumed);
    out.assign(msg.bytes.begin() + static_cast<std::ptrdiff_t>(c.consumed),
               msg.bytes.begin() + static_cast<std::ptrdiff_t>(c.consumed + k));
    c.consumed += k;
    if (c.consumed >= msg.bytes.size()) {
        c.inbound.pop_front();
        c.consumed = 0;
    }
    return static_cast<std::int32_t>(k);
}

std::int32_t VirtualFs::send(std::uint32_t proxy, std::int32_t fd, std::span<const std::byte> bytes) {
    OpenFd* f = fd_entry(proxy, fd);
    if (!f) return -kEBADF;
    if (f->kind != FdKind::Conn) return -kENOTCONN;
    conns_[f->conn].outbound.emplace_back(bytes.begin(), bytes.end());
    return static_cast<std::int32_t>(bytes.size());
}

std::optional<SimTime> VirtualFs::next_arrival(SimTime now) const {
    std::optional<SimTime> best;
    auto consider = [&](SimTime t) {
        if (t > now && (!best || t < *best)) best = t;
    };
    for (const auto& c : conns_) {
        if (!c.accepted) consider(c.at);
        if (!c.inbound.empty()) consider(c.inbound.front().at);
    }
    return best;
}

void VirtualFs::inject_connection(std::uint16_t port, SimTime at, std::vector<WireMessage> messages) {
    Connection c;
    c.at = at;
    for (auto& m : messages) c.inbound.push_back(std::move(m));
    conns_.push_back(std::move(c));
    pending_by_port_[port].push_back(conns_.size() - 1);
}

void VirtualFs::kill_proxy(std::uint32_t proxy) {
    fds_.erase(proxy);
    for (auto it = bound_.begin(); it != bound_.end();) {
        if (it->second.first == proxy)
            it = bound_.erase(it);
        else
            ++it;
    }
}

const FsNode* VirtualFs::node(const std::string& path) const {
    auto it = nodes_.find(path);
    return it == nodes_.end() ? nullptr : &it->second;
}

std::optional<std::vector<std::byte>> VirtualFs::file_bytes(const std::string& path) const {
    const FsNode* n = node(path);
    if (!n || n->kind == NodeKind::Dir) return std::nullopt;
    return n->data;
}

std::vector<std::vector<std::byte>> VirtualFs::sent(std::uint32_t proxy) const {
    std::vector<std::vector<std::byte>> out;
    auto t = fds_.find(proxy);
    if (t == fds_.end()) return out;
    for (const auto& [fd, f] : t->second)
        if (f.kind == FdKind::Conn)
            for (const auto& m : conns_[f.conn].outbound) out.push_back(m);
    return out;
}

std::uint64_t VirtualFs::digest() const {
    Fnv1a h;
    for (const auto& [path, n] : nodes_) {
        h.str(path).u64(static_cast<std::uint64_t>(n.kind)).u64(n.block_size).u64(n.data.size());
        h.bytes(n.data);
    }
    return h.digest();
}

std::size_t VirtualFs::open_fds(std::uint32_t proxy) const {
    auto t = fds_.find(proxy);
    return t == fds_.end() ? 0 : t->second.size();
}

bool VirtualFs::is_connection(std::uint32_t proxy, std::int32_t fd) const {
    auto t = fds_.find(proxy);
    if (t == fds_.end()) return false;
    auto it = t->second.find(fd);
    return it != t->second.end() && it->second.kind == FdKind::Conn;
}

bool VirtualFs::poke(const std::string& path, std::size_t off, std::byte value) {
    auto it = nodes_.find(path);
    if (it == nodes_.end() || off >= it->second.data.size()) return false;
    it->second.data[off] = value;
    return true;
}

}  // namespace ringsim
