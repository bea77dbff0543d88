#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

namespace emomap::testing {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("emomap_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Random text drawn from a small alphabet that hits every scoring branch.
inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static const std::string words[] = {"devastated", "amazing", "love", "nice", "so", "never", "the",
                                        "HATE", "Okay", "very", "Everything", "x", "\xc3\xa9t\xc3\xa9"};
    static const std::string punct[] = {" ", " ", " ", "!", "?", ".", ",", "!!", "  ", "\t", "\n"};
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::string out;
    const auto n = len(rng);
    while (out.size() < n) {
        switch (rng() % 4) {
            case 0: out += words[rng() % std::size(words)]; break;
            case 1: out += punct[rng() % std::size(punct)]; break;
            case 2: out.push_back(static_cast<char>(rng() % 256)); break;
            default: out.push_back(static_cast<char>('A' + rng() % 58)); break;
        }
    }
    return out;
}

}  // namespace emomap::testing
