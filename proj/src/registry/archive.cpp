#include "cb/registry/archive.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "cb/core/hash.hpp"

namespace cb::archive {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kBlock = 512;

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptArchive, what); }

bool safe_path(std::string_view p) {
    if (p.empty() || p.front() == '/' || p.back() == '/') return false;
    std::size_t start = 0;
    while (start <= p.size()) {
        auto end = p.find('/', start);
        if (end == std::string_view::npos) end = p.size();
        auto part = p.substr(start, end - start);
        if (part.empty() || part == "." || part == "..") return false;
        start = end + 1;
    }
    return true;
}

void put_octal(char* field, std::size_t width, std::uint64_t value) {
    // width includes the trailing NUL
    std::string digits(width - 1, '0');
    for (std::size_t i = width - 1; i-- > 0 && value;) {
        digits[i] = static_cast<char>('0' + (value & 7));
        value >>= 3;
    }
    if (value) corrupt("value too large for tar header");
    std::memcpy(field, digits.data(), width - 1);
    field[width - 1] = '\0';
}

std::uint64_t get_octal(const char* field, std::size_t width) {
    std::uint64_t v = 0;
    std::size_t i = 0;
    while (i < width && field[i] == ' ') ++i;
    for (; i < width && field[i] >= '0' && field[i] <= '7'; ++i) v = v * 8 + static_cast<std::uint64_t>(field[i] - '0');
    for (; i < width; ++i) {
        if (field[i] != '\0' && field[i] != ' ') corrupt("bad octal field in tar header");
    }
    return v;
}

std::string field_string(const char* field, std::size_t width) {
    return std::string(field, strnlen(field, width));
}

unsigned header_checksum(const std::array<char, kBlock>& h) {
    unsigned sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) {
        sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(h[i]);
    }
    return sum;
}

}  // namespace

std::string gzip(std::string_view raw) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw Error(ErrorCode::Io, "deflateInit2 failed");
    }
    std::string out;
    out.resize(deflateBound(&zs, raw.size()) + 32);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
    zs.avail_in = static_cast<uInt>(raw.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(ErrorCode::Io, "deflate failed");
    return out;
}

std::string gunzip(std::string_view compressed) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw Error(ErrorCode::Io, "inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());
    std::string out;
    std::array<char, 1 << 16> buf;
    int rc;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf.data());
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            corrupt("payload is not valid gzip data");
        }
        out.append(buf.data(), buf.size() - zs.avail_out);
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            corrupt("truncated gzip stream");
        }
    } while (rc != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}

std::string pack(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.path < b.path; });
    std::string tar;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Entry& e = entries[i];
        if (!safe_path(e.path)) corrupt("unsafe archive path '" + e.path + "'");
        if (i > 0 && entries[i - 1].path == e.path) corrupt("duplicate archive path '" + e.path + "'");
        std::array<char, kBlock> h{};
        std::string name = e.path, prefix;
        if (name.size() > 100) {
            auto cut = name.rfind('/', 155);
            if (cut == std::string::npos || name.size() - cut - 1 > 100) corrupt("archive path too long: " + e.path);
            prefix = name.substr(0, cut);
            name = name.substr(cut + 1);
        }
        std::memcpy(h.data(), name.data(), name.size());
        put_octal(h.data() + 100, 8, e.mode & 07777);
        put_octal(h.data() + 108, 8, 0);
        put_octal(h.data() + 116, 8, 0);
        put_octal(h.data() + 124, 12, e.data.size());
        put_octal(h.data() + 136, 12, 0);
        h[156] = '0';
        std::memcpy(h.data() + 257, "ustar", 6);
        std::memcpy(h.data() + 263, "00", 2);
        std::memcpy(h.data() + 345, prefix.data(), prefix.size());
        put_octal(h.data() + 148, 7, header_checksum(h));
        h[155] = ' ';
        tar.append(h.data(), kBlock);
        tar.append(e.data);
        tar.append((kBlock - e.data.size() % kBlock) % kBlock, '\0');
    }
    tar.append(2 * kBlock, '\0');
    return gzip(tar);
}

std::vector<Entry> unpack(std::string_view bytes) {
    const std::string tar = gunzip(bytes);
    std::vector<Entry> out;
    std::set<std::string> seen;
    std::size_t pos = 0;
    while (true) {
        if (pos + kBlock > tar.size()) corrupt("archive ends without end-of-archive marker");
        std::array<char, kBlock> h;
        std::memcpy(h.data(), tar.data() + pos, kBlock);
        if (std::all_of(h.begin(), h.end(), [](char c) { return c == '\0'; })) break;
        if (get_octal(h.data() + 148, 8) != header_checksum(h)) corrupt("tar header checksum mismatch");
        std::string name = field_string(h.data(), 100);
        std::string prefix = field_string(h.data() + 345, 155);
        if (std::memcmp(h.data() + 257, "ustar", 5) == 0 && !prefix.empty()) name = prefix + "/" + name;
        const std::uint64_t size = get_octal(h.data() + 124, 12);
        const char type = h[156];
        pos += kBlock;
        if (pos + size > tar.size()) corrupt("tar entry '" + name + "' truncated");
        if (type == '0' || type == '\0') {
            if (name.starts_with("./")) name = name.substr(2);
            if (!safe_path(name)) corrupt("unsafe archive path '" + name + "'");
            if (!seen.insert(name).second) corrupt("duplicate archive path '" + name + "'");
            Entry e;
            e.path = name;
            e.data.assign(tar.data() + pos, size);
            e.mode = static_cast<std::uint32_t>(get_octal(h.data() + 100, 8) & 0777);
            out.push_back(std::move(e));
        } else if (type != '5' && type != 'x' && type != 'g') {
            corrupt("unsupported tar entry type for '" + name + "'");
        }
        pos += (size + kBlock - 1) / kBlock * kBlock;
    }
    return out;
}

const Entry* find(const std::vector<Entry>& entries, std::string_view path) {
    for (const auto& e : entries) {
        if (e.path == path) return &e;
    }
    return nullptr;
}

const Entry* find_by_hash(const std::vector<Entry>& entries, std::string_view content_hash) {
    for (const auto& e : entries) {
        if (e.path != kManifestName && sha256_hex(e.data) == content_hash) return &e;
    }
    return nullptr;
}

void extract(const std::vector<Entry>& entries, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& e : entries) {
        if (!safe_path(e.path)) corrupt("unsafe archive path '" + e.path + "'");
        fs::path target = dir / e.path;
        fs::create_directories(target.parent_path());
        std::ofstream out(target, std::ios::binary | std::ios::trunc);
        out.write(e.data.data(), static_cast<std::streamsize>(e.data.size()));
        if (!out) throw Error(ErrorCode::Io, "cannot write " + target.string());
        out.close();
        fs::permissions(target, static_cast<fs::perms>(e.mode & 0777), fs::perm_options::replace);
    }
}

std::vector<Entry> read_tree(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, dir.string() + " is not a directory");
    std::vector<Entry> out;
    for (const auto& de : fs::recursive_directory_iterator(dir)) {
        if (!de.is_regular_file()) continue;
        std::ifstream in(de.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        Entry e;
        e.path = fs::relative(de.path(), dir).generic_string();
        e.data = ss.str();
        auto perms = fs::status(de.path()).permissions();
        e.mode = (perms & fs::perms::owner_exec) != fs::perms::none ? 0755 : 0644;
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.path < b.path; });
    return out;
}

Manifest read_manifest(const std::vector<Entry>& entries) {
    const Entry* m = find(entries, kManifestName);
    if (!m) corrupt("archive has no manifest.json at its root");
    try {
        Json j = parse_json(m->data);
        Manifest out;
        out.descriptor = descriptor_from_json(j);
        if (j.contains("metadata")) {
            if (!j["metadata"].is_object()) corrupt("manifest metadata must be an object");
            out.metadata = j["metadata"];
        }
        return out;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptArchive) throw;
        corrupt(std::string("malformed manifest.json: ") + e.what());
    }
}

std::string write_manifest(const Manifest& m) {
    Json j = descriptor_to_json(m.descriptor);
    j["metadata"] = m.metadata;
    return canonical_dump(j);
}

void check_payload(const Descriptor& descriptor, const std::vector<Entry>& entries) {
    if (auto d = std::get_if<DatasetDescriptor>(&descriptor)) {
        for (const auto& f : d->files) {
            const Entry* e = find_by_hash(entries, f.content_hash);
            if (!e) corrupt("dataset file '" + f.logical_name + "' is not in the archive");
            if (static_cast<std::int64_t>(e->data.size()) != f.byte_size) {
                corrupt("dataset file '" + f.logical_name + "' has the wrong byte size");
            }
        }
        return;
    }
    const std::string& entry = std::holds_alternative<ModelDescriptor>(descriptor)
                                   ? std::get<ModelDescriptor>(descriptor).entrypoint
                                   : std::get<MetricDescriptor>(descriptor).entrypoint;
    if (!find(entries, entry)) corrupt("entrypoint '" + entry + "' is not in the archive");
}

}  // namespace cb::archive
