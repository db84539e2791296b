#include "d2lv/rng.hpp"

#include "d2lv/errors.hpp"

namespace d2lv {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_bytes(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

std::uint64_t derive_stream_seed(std::uint64_t global_seed, std::string_view image_id,
                                 std::uint32_t variant_index) {
    std::uint64_t h = splitmix64(global_seed);
    h = splitmix64(h ^ hash_bytes(image_id));
    h = splitmix64(h ^ variant_index);
    return h;
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) {
        throw DomainError("Rng::index requires a positive range");
    }
    // Lemire's multiply-shift; unbiased enough for augmentation draws and
    // exactly reproducible.
    unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::size_t>(product >> 64);
}

} // namespace d2lv
