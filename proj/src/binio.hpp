#pragma once

// Little-endian binary stream helpers with a running FNV-1a digest, used by
// the checkpoint and database containers.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "detective/common.hpp"

namespace detective::binio {

class Writer {
  public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot write file: " + path);
    }

    void bytes(const void* data, std::size_t len) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        digest_ = fnv1a64_update(data, len, digest_);
    }

    template <typename T>
    void pod(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        bytes(&value, sizeof(T));
    }

    void str(const std::string& s) {
        pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void f64_block(const std::vector<double>& block) {
        pod<std::uint64_t>(block.size());
        bytes(block.data(), block.size() * sizeof(double));
    }

    std::uint64_t digest() const { return digest_; }

    void finish_with_digest() {
        const std::uint64_t d = digest_;
        out_.write(reinterpret_cast<const char*>(&d), sizeof(d));
        close();
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write failed: " + path_);
    }

  private:
    static std::uint64_t fnv1a64_update(const void* data, std::size_t len, std::uint64_t h) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
        return h;
    }

    std::string path_;
    std::ofstream out_;
    std::uint64_t digest_ = 14695981039346656037ULL;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open file: " + path);
    }

    void bytes(void* data, std::size_t len) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
        if (in_.gcount() != static_cast<std::streamsize>(len))
            throw IoError("truncated file: " + path_);
        digest_ = update(data, len, digest_);
    }

    template <typename T>
    T pod() {
        static_assert(std::is_trivially_copyable_v<T>);
        T value;
        bytes(&value, sizeof(T));
        return value;
    }

    std::string str(std::size_t max_len = 1 << 20) {
        const auto len = pod<std::uint32_t>();
        if (len > max_len) throw IoError("corrupt string length in " + path_);
        std::string s(len, '\0');
        bytes(s.data(), len);
        return s;
    }

    std::vector<double> f64_block(std::size_t max_len = std::size_t{1} << 32) {
        const auto len = pod<std::uint64_t>();
        if (len > max_len) throw IoError("corrupt block length in " + path_);
        std::vector<double> block(len);
        bytes(block.data(), len * sizeof(double));
        return block;
    }

    std::uint64_t digest() const { return digest_; }

    void verify_trailing_digest() {
        const std::uint64_t expected = digest_;
        std::uint64_t stored = 0;
        in_.read(reinterpret_cast<char*>(&stored), sizeof(stored));
        if (in_.gcount() != sizeof(stored)) throw IoError("truncated file: " + path_);
        if (stored != expected) throw IoError("checksum mismatch in " + path_);
        // nothing may follow the digest
        char extra;
        if (in_.read(&extra, 1)) throw IoError("trailing garbage in " + path_);
    }

  private:
    static std::uint64_t update(const void* data, std::size_t len, std::uint64_t h) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
        return h;
    }

    std::string path_;
    std::ifstream in_;
    std::uint64_t digest_ = 14695981039346656037ULL;
};

}  // namespace detective::binio
