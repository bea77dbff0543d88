#include "emomap/cache.hpp"

#include <bit>
#include <cstring>
#include <filesystem>

#include "emomap/error.hpp"

namespace emomap {

namespace {

constexpr char kHeaderMagic[8] = {'E', 'M', 'B', 'C', 'A', 'C', 'H', 'E'};
constexpr char kIndexMagic[8] = {'E', 'M', 'B', 'I', 'N', 'D', 'E', 'X'};
constexpr char kTrailerMagic[8] = {'E', 'M', 'B', 'T', 'A', 'I', 'L', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kHeaderSize = 16;
constexpr std::uint64_t kTrailerSize = 16;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

bool read_at(std::ifstream& in, std::uint64_t offset, void* dst, std::size_t n) {
    in.clear();
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::string path, std::size_t dim) : path_(std::move(path)), dim_(dim) {
    if (dim_ == 0) throw ValidationError("cache: dimension must be positive");
    load();
}

std::size_t EmbeddingCache::record_size(std::size_t model_len) const {
    return 2 + model_len + 32 + 4 * dim_;
}

void EmbeddingCache::load() {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::exists(path_, ec) || fs::file_size(path_, ec) == 0) {
        if (auto parent = fs::path(path_).parent_path(); !parent.empty()) fs::create_directories(parent, ec);
        std::ofstream out(path_, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cache: cannot create '" + path_ + "'");
        std::string header(kHeaderMagic, 8);
        put_u32(header, kVersion);
        put_u32(header, static_cast<std::uint32_t>(dim_));
        std::string full = header;
        full.append(kIndexMagic, 8);
        put_u64(full, 0);
        put_u64(full, kHeaderSize);
        full.append(kTrailerMagic, 8);
        out.write(full.data(), static_cast<std::streamsize>(full.size()));
        if (!out) throw IoError("cache: write failure on '" + path_ + "'");
        data_end_ = kHeaderSize;
        return;
    }

    const auto file_size = fs::file_size(path_);
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IoError("cache: cannot open '" + path_ + "'");
    unsigned char header[kHeaderSize];
    if (!read_at(in, 0, header, sizeof header) || std::memcmp(header, kHeaderMagic, 8) != 0) {
        throw ParseError("cache: '" + path_ + "' is not an embedding cache file");
    }
    const auto version = get_le(header + 8, 4);
    const auto dim = get_le(header + 12, 4);
    if (version != kVersion) throw ParseError("cache: unsupported version " + std::to_string(version));
    if (dim != dim_) {
        throw ParseError("cache: '" + path_ + "' stores dimension " + std::to_string(dim) + ", expected " +
                         std::to_string(dim_));
    }
    if (!load_index(in, file_size)) {
        index_.clear();
        order_.clear();
        scan_records(in, file_size);
        recovered_ = true;
    }
}

bool EmbeddingCache::load_index(std::ifstream& in, std::uintmax_t file_size) {
    if (file_size < kHeaderSize + 16 + kTrailerSize) return false;
    unsigned char trailer[kTrailerSize];
    if (!read_at(in, file_size - kTrailerSize, trailer, sizeof trailer)) return false;
    if (std::memcmp(trailer + 8, kTrailerMagic, 8) != 0) return false;
    const std::uint64_t index_off = get_le(trailer, 8);
    if (index_off < kHeaderSize || index_off + 16 > file_size - kTrailerSize) return false;

    unsigned char ih[16];
    if (!read_at(in, index_off, ih, sizeof ih) || std::memcmp(ih, kIndexMagic, 8) != 0) return false;
    const std::uint64_t count = get_le(ih + 8, 8);
    if (index_off + 16 + count * 8 + kTrailerSize != file_size) return false;

    std::vector<unsigned char> offs(count * 8);
    if (count > 0 && !read_at(in, index_off + 16, offs.data(), offs.size())) return false;

    std::uint64_t expected = kHeaderSize;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t off = get_le(offs.data() + 8 * i, 8);
        if (off != expected) return false;
        unsigned char len_buf[2];
        if (!read_at(in, off, len_buf, 2)) return false;
        const auto mlen = static_cast<std::size_t>(get_le(len_buf, 2));
        std::string model(mlen, '\0');
        Sha256Digest digest{};
        if (!read_at(in, off + 2, model.data(), mlen) || !read_at(in, off + 2 + mlen, digest.data(), 32)) {
            return false;
        }
        expected = off + record_size(mlen);
        if (expected > index_off) return false;
        index_.emplace(Key{std::move(model), digest}, off);
        order_.push_back(off);
    }
    if (expected != index_off) return false;
    data_end_ = index_off;
    return true;
}

void EmbeddingCache::scan_records(std::ifstream& in, std::uintmax_t file_size) {
    std::uint64_t off = kHeaderSize;
    while (off + 2 <= file_size) {
        unsigned char len_buf[2];
        if (!read_at(in, off, len_buf, 2)) break;
        // an index block is not a record
        char probe[8];
        if (read_at(in, off, probe, 8) && std::memcmp(probe, kIndexMagic, 8) == 0) break;
        const auto mlen = static_cast<std::size_t>(get_le(len_buf, 2));
        const std::uint64_t end = off + record_size(mlen);
        if (end > file_size) break;
        std::string model(mlen, '\0');
        Sha256Digest digest{};
        if (!read_at(in, off + 2, model.data(), mlen) || !read_at(in, off + 2 + mlen, digest.data(), 32)) break;
        index_.emplace(Key{std::move(model), digest}, off);
        order_.push_back(off);
        off = end;
    }
    data_end_ = off;
}

std::optional<std::vector<float>> EmbeddingCache::lookup(std::string_view model, std::string_view text) const {
    Key key{std::string(model), sha256(text)};
    std::uint64_t off = 0;
    {
        std::lock_guard lock(mu_);
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        off = it->second;
    }
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IoError("cache: cannot open '" + path_ + "'");
    std::vector<unsigned char> raw(4 * dim_);
    if (!read_at(in, off + 2 + model.size() + 32, raw.data(), raw.size())) {
        throw IoError("cache: truncated record in '" + path_ + "'");
    }
    std::vector<float> out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        out[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(raw.data() + 4 * i, 4)));
    }
    return out;
}

bool EmbeddingCache::contains(std::string_view model, std::string_view text) const {
    Key key{std::string(model), sha256(text)};
    std::lock_guard lock(mu_);
    return index_.count(key) > 0;
}

void EmbeddingCache::append(std::string_view model,
                            const std::vector<std::pair<std::string, std::vector<float>>>& items) {
    if (model.size() > 0xFFFF) throw ValidationError("cache: model name too long");
    std::lock_guard lock(mu_);

    std::string blob;
    std::vector<std::pair<Key, std::uint64_t>> added;
    std::uint64_t off = data_end_;
    for (const auto& [text, vec] : items) {
        if (vec.size() != dim_) {
            throw ValidationError("cache: vector has dimension " + std::to_string(vec.size()) + ", expected " +
                                  std::to_string(dim_));
        }
        Key key{std::string(model), sha256(text)};
        if (index_.count(key)) continue;
        bool dup = false;
        for (const auto& a : added) dup = dup || a.first == key;
        if (dup) continue;
        put_u16(blob, static_cast<std::uint16_t>(model.size()));
        blob.append(model);
        blob.append(reinterpret_cast<const char*>(key.second.data()), 32);
        for (float f : vec) put_u32(blob, std::bit_cast<std::uint32_t>(f));
        added.emplace_back(std::move(key), off);
        off += record_size(model.size());
    }
    if (added.empty()) return;

    std::vector<std::uint64_t> new_order = order_;
    for (const auto& a : added) new_order.push_back(a.second);
    std::string tail(kIndexMagic, 8);
    put_u64(tail, new_order.size());
    for (auto o : new_order) put_u64(tail, o);
    put_u64(tail, off);
    tail.append(kTrailerMagic, 8);

    std::error_code ec;
    std::filesystem::resize_file(path_, data_end_, ec);
    if (ec) throw IoError("cache: cannot truncate '" + path_ + "': " + ec.message());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cache: cannot append to '" + path_ + "'");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
    out.flush();
    if (!out) throw IoError("cache: write failure on '" + path_ + "'");

    for (auto& a : added) index_.emplace(std::move(a.first), a.second);
    order_ = std::move(new_order);
    data_end_ = off;
}

EmbeddingCache::Stats EmbeddingCache::stats() const {
    std::lock_guard lock(mu_);
    Stats s;
    s.records = index_.size();
    for (const auto& [key, off] : index_) ++s.per_model[key.first];
    std::error_code ec;
    s.file_bytes = std::filesystem::file_size(path_, ec);
    s.recovered = recovered_;
    return s;
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard lock(mu_);
    return index_.size();
}

}  // namespace emomap
