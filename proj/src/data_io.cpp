#include "ffgaf/data.hpp"

#include <unistd.h>
#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ffgaf/common.hpp"

namespace ffgaf {

namespace {

bool has_gz_suffix(const std::string& path) {
    return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const std::string& path) {
    z_stream zs{};
    // 15+16: zlib header detection off, gzip wrapper on.
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw data_error("gzip: inflateInit failed");
    std::vector<std::uint8_t> out;
    out.reserve(in.size() * 4);
    std::uint8_t buf[1 << 16];
    zs.next_in = const_cast<std::uint8_t*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    do {
        zs.next_out = buf;
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw data_error("gzip: corrupt stream in " + path);
        }
        out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    } while (rc != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& in,
                                        const std::string& path) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK) {
        throw data_error("gzip: deflateInit failed");
    }
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    zs.next_in = const_cast<std::uint8_t*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    do {
        zs.next_out = buf;
        zs.avail_out = sizeof buf;
        rc = deflate(&zs, Z_FINISH);
        if (rc == Z_STREAM_ERROR) {
            deflateEnd(&zs);
            throw data_error("gzip: deflate failed for " + path);
        }
        out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    } while (rc != Z_STREAM_END);
    deflateEnd(&zs);
    return out;
}

void write_raw_atomic(const std::string& path, const std::uint8_t* data, std::size_t size) {
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw data_error("cannot open '" + tmp + "' for writing");
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw data_error("short write to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw data_error("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

} // namespace

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (has_gz_suffix(path)) return gunzip(bytes, path);
    return bytes;
}

void write_file_bytes_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    if (has_gz_suffix(path)) {
        const auto packed = gzip_compress(bytes, path);
        write_raw_atomic(path, packed.data(), packed.size());
    } else {
        write_raw_atomic(path, bytes.data(), bytes.size());
    }
}

void write_text_atomic(const std::string& path, const std::string& text) {
    write_raw_atomic(path, reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

} // namespace ffgaf
