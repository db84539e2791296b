#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace d2lv {

// 64-bit mix used for seed derivation. Stable across platforms and releases;
// serialized corpora depend on it.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over bytes, then mixed.
std::uint64_t hash_bytes(std::string_view bytes);

// Order-independent seed for one (global seed, image id, variant) work item.
std::uint64_t derive_stream_seed(std::uint64_t global_seed, std::string_view image_id,
                                 std::uint32_t variant_index);

// mt19937_64 with portable value helpers. std:: distributions are
// implementation-defined, so all draws go through these.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform index in [0, n). n must be positive.
    std::size_t index(std::size_t n);

    // Inclusive integer range.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo) + 1));
    }

    bool chance(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace d2lv
