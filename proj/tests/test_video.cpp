#include <doctest.h>

#include "msap/video.hpp"
#include "test_support.hpp"

using namespace msap;

namespace {

// Frame j is filled with the value j, so frames identify themselves.
FullVideo counting_video(std::size_t T) {
    FullVideo v;
    v.id = "count";
    for (std::size_t t = 0; t < T; ++t) v.frames.push_back(Tensor::filled({1, 2, 2}, static_cast<double>(t)));
    return v;
}

std::vector<double> frame_ids(const SampledSegment& s) {
    std::vector<double> out;
    for (const auto& f : s.frames) out.push_back(f[0]);
    return out;
}

std::vector<std::size_t> lengths(const std::vector<Segment>& segs) {
    std::vector<std::size_t> out;
    for (const auto& s : segs) out.push_back(s.length());
    return out;
}

}  // namespace

TEST_CASE("split_segments lengths") {
    CHECK(lengths(split_segments(60, 10)) == std::vector<std::size_t>(10, 6));
    CHECK(lengths(split_segments(10, 10)) == std::vector<std::size_t>(10, 1));
    CHECK(lengths(split_segments(23, 10)) == std::vector<std::size_t>{3, 3, 3, 2, 2, 2, 2, 2, 2, 2});
    CHECK_THROWS_AS(split_segments(9, 10), InputError);
    CHECK_THROWS_AS(split_segments(9, 0), InputError);

    const auto segs = split_segments(23, 10, "v");
    std::size_t expected_begin = 0;
    for (std::size_t k = 0; k < segs.size(); ++k) {
        CHECK(segs[k].index == k + 1);
        CHECK(segs[k].begin == expected_begin);
        CHECK(segs[k].parent == "v");
        expected_begin = segs[k].end;
    }
    CHECK(expected_begin == 23);
}

TEST_CASE("observation_ratio") {
    CHECK(observation_ratio(2, 10) == 0.2);
    CHECK(observation_ratio(10, 10) == 1.0);
    CHECK(observation_ratio(1, 4) == 0.25);
    CHECK_THROWS_AS(observation_ratio(0, 10), InputError);
    CHECK_THROWS_AS(observation_ratio(11, 10), InputError);
}

TEST_CASE("partial videos are prefixes") {
    const FullVideo v = counting_video(60);
    CHECK(partial(v, 10, 10).frames.size() == 60);
    const PartialVideo p = partial(v, 2, 10);
    CHECK(p.frames.size() == 12);
    CHECK(p.segments.size() == 2);
    CHECK(p.frames.back()[0] == 11.0);
    CHECK_THROWS_AS(partial(v, 0, 10), InputError);
    CHECK_THROWS_AS(partial(v, 11, 10), InputError);

    for (std::size_t k = 1; k < 10; ++k) {
        const auto a = partial(v, k, 10), b = partial(v, k + 1, 10);
        REQUIRE(a.frames.size() < b.frames.size());
        for (std::size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i][0] == b.frames[i][0]);
    }

    // Concatenating all segments reproduces the video.
    const auto whole = partial(v, 10, 10);
    std::size_t next = 0;
    for (std::size_t k = 1; k <= 10; ++k)
        for (const auto& f : whole.segment_frames(k)) CHECK(f[0] == static_cast<double>(next++));
    CHECK(next == 60);
    CHECK_THROWS_AS(p.segment_frames(3), InputError);
}

TEST_CASE("sample_frames windows") {
    const FullVideo v = counting_video(12);
    std::span<const Tensor> all(v.frames);
    std::mt19937_64 rng(3);

    auto five = all.subspan(2, 5);
    CHECK(frame_ids(sample_frames(five, SamplingMode::deterministic)) == std::vector<double>{2, 3, 4, 5, 6});
    CHECK(frame_ids(sample_frames(five, SamplingMode::random, &rng)) == std::vector<double>{2, 3, 4, 5, 6});

    auto six = all.subspan(0, 6);
    const auto s6 = sample_frames(six, SamplingMode::deterministic);
    CHECK(frame_ids(s6) == std::vector<double>{0, 1, 2, 3, 4});
    CHECK(s6.center_frame()[0] == 2.0);

    auto three = all.subspan(4, 3);
    CHECK(frame_ids(sample_frames(three, SamplingMode::deterministic)) == std::vector<double>{4, 4, 5, 6, 6});

    CHECK_THROWS_AS(sample_frames(all.subspan(0, 0), SamplingMode::deterministic), InputError);
    CHECK_THROWS_AS(sample_frames(six, SamplingMode::random, nullptr), ContractError);
}

TEST_CASE("random sampling stays inside the segment and is consecutive") {
    const FullVideo v = counting_video(40);
    std::span<const Tensor> seg = std::span<const Tensor>(v.frames).subspan(10, 9);
    std::mt19937_64 rng(11);
    std::vector<int> starts(5, 0);
    for (int i = 0; i < 500; ++i) {
        const auto ids = frame_ids(sample_frames(seg, SamplingMode::random, &rng));
        for (std::size_t j = 1; j < ids.size(); ++j) CHECK(ids[j] == ids[j - 1] + 1);
        REQUIRE(ids.front() >= 10.0);
        REQUIRE(ids.back() <= 18.0);
        ++starts[static_cast<std::size_t>(ids.front() - 10.0)];
    }
    for (int c : starts) CHECK(c > 50);
}

TEST_CASE("sample_spanning covers the prefix in order") {
    const FullVideo v = counting_video(30);
    std::span<const Tensor> all(v.frames);
    CHECK(frame_ids(sample_spanning(all, SamplingMode::deterministic)) == std::vector<double>{3, 9, 15, 21, 27});
    CHECK(frame_ids(sample_spanning(all.subspan(0, 3), SamplingMode::deterministic)) == std::vector<double>{0, 0, 1, 2, 2});

    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const auto ids = frame_ids(sample_spanning(all.subspan(0, 12), SamplingMode::random, &rng));
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(ids[j] >= static_cast<double>(j * 12 / 5));
            CHECK(ids[j] < static_cast<double>((j + 1) * 12 / 5));
        }
    }
}

TEST_CASE("validate_video") {
    FullVideo v = counting_video(3);
    CHECK_NOTHROW(validate_video(v));
    v.frames.push_back(Tensor::zeros({1, 3, 3}));
    CHECK_THROWS_AS(validate_video(v), InputError);
    CHECK_THROWS_AS(validate_video(FullVideo{}), InputError);
}
