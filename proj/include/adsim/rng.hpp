#pragma once

#include <cstdint>
#include <cstddef>

namespace adsim {

// Counter-based generator (Philox 4x32, 10 rounds). A generator is keyed by
// (seed, stream): draws depend only on the key and the position in the stream,
// never on which thread or in which order other streams were consumed. This is
// what makes sampled estimates reproducible bit-for-bit under any worker count.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          s0_(static_cast<std::uint32_t>(stream)),
          s1_(static_cast<std::uint32_t>(stream >> 32)) {}

    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    std::uint64_t next_u64() {
        if (have_ == 0) refill();
        --have_;
        return buf_[1 - have_];
    }
    result_type operator()() { return next_u64(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection keeps the draw exactly uniform.
        std::uint64_t lim = max() - max() % n;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= lim);
        return x % n;
    }

    // Raw block output, used by the known-answer checks.
    static void block(const std::uint32_t ctr[4], const std::uint32_t key[2],
                      std::uint32_t out[4]);

private:
    void refill();

    std::uint32_t key0_, key1_;
    std::uint32_t s0_, s1_;
    std::uint64_t ctr_ = 0;
    std::uint64_t buf_[2] = {0, 0};
    int have_ = 0;
};

// Stream-id layout: a purpose tag in the top byte keeps draws for unrelated
// uses (instance sampling, reserve draws, click simulation, price draws)
// statistically and structurally independent even at equal indices.
enum class StreamKind : std::uint64_t {
    instance = 1,
    reserve = 2,
    click = 3,
    price = 4,
    gsp_tiebreak = 5,
    pool = 6,
    misc = 7,
};

inline std::uint64_t stream_id(StreamKind kind, std::uint64_t index) {
    return (static_cast<std::uint64_t>(kind) << 56) | (index & 0x00ffffffffffffffULL);
}

inline Philox make_rng(std::uint64_t seed, StreamKind kind, std::uint64_t index) {
    return Philox(seed, stream_id(kind, index));
}

} // namespace adsim
