#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "mobfc/csv.hpp"
#include "mobfc/geo.hpp"
#include "mobfc/parallel.hpp"

namespace mobfc::kmeans {

using geo::Point;

enum class Init { kmeans_plus_plus, provided };

struct KMeansConfig {
    std::size_t k = 15;
    std::size_t max_iter = 300;
    double tol = 1e-6;  // max centroid shift, degrees
    std::uint64_t seed = 42;
    Init init = Init::kmeans_plus_plus;
    std::vector<Point> initial_centroids;  // used when init == provided
    std::size_t n_init = 1;
    bool latitude_correction = false;  // scale longitude by cos(mean latitude)
    unsigned threads = 1;
};

struct KMeansModel {
    std::vector<Point> centroids;
    double inertia = 0.0;
    std::size_t n_iter = 0;
    bool converged = false;
    std::vector<std::uint32_t> assignments;
    std::vector<double> inertia_history;  // one entry per assignment step
    std::uint64_t seed = 0;
    double lon_scale = 1.0;  // applied to longitudes before distance computation
};

inline double squared_distance(Point a, Point b) {
    const double dx = a.lon - b.lon;
    const double dy = a.lat - b.lat;
    return dx * dx + dy * dy;
}

// Nearest centroid; ties go to the lowest index.
inline std::uint32_t nearest(Point p, std::span<const Point> centroids, double* d2_out = nullptr) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double d = squared_distance(p, centroids[j]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(j);
        }
    }
    if (d2_out) *d2_out = best_d;
    return best;
}

namespace detail {

// Portable uniform [0, 1): 53 high bits of a 64-bit Mersenne Twister draw.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

inline std::size_t count_distinct(std::span<const Point> points) {
    std::vector<Point> sorted(points.begin(), points.end());
    auto less = [](Point a, Point b) { return a.lon != b.lon ? a.lon < b.lon : a.lat < b.lat; };
    std::sort(sorted.begin(), sorted.end(), less);
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

inline constexpr std::size_t kChunk = 4096;

}  // namespace detail

inline std::vector<Point> kmeans_pp_init(std::span<const Point> points, std::size_t k,
                                         std::uint64_t seed) {
    if (k == 0) throw std::invalid_argument("kmeans_pp_init: k must be positive");
    if (detail::count_distinct(points) < k)
        throw std::invalid_argument("kmeans_pp_init: fewer distinct points than clusters");
    std::mt19937_64 rng(seed);
    std::vector<Point> centroids;
    centroids.push_back(points[detail::uniform_index(rng, points.size())]);
    std::vector<double> d2(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centroids[0]);
    while (centroids.size() < k) {
        double total = 0.0;
        for (double d : d2) total += d;
        const double target = detail::uniform01(rng) * total;
        double cum = 0.0;
        std::size_t pick = points.size();
        std::size_t last_positive = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (d2[i] <= 0.0) continue;
            last_positive = i;
            cum += d2[i];
            if (cum > target) {
                pick = i;
                break;
            }
        }
        if (pick == points.size()) pick = last_positive;  // rounding at the tail
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < points.size(); ++i)
            d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
    return centroids;
}

namespace detail {

// Chunks have a fixed size independent of the thread count, and partial sums
// are merged in chunk order, so results are reproducible for any --threads.
inline double assign_all(std::span<const Point> points, std::span<const Point> centroids,
                         std::vector<std::uint32_t>& labels, std::vector<double>& d2,
                         unsigned threads) {
    const std::size_t n_chunks = (points.size() + kChunk - 1) / kChunk;
    std::vector<double> partial(n_chunks, 0.0);
    parallel_tasks(n_chunks, threads, [&](std::size_t c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(points.size(), lo + kChunk);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            labels[i] = nearest(points[i], centroids, &d2[i]);
            s += d2[i];
        }
        partial[c] = s;
    });
    double inertia = 0.0;
    for (double s : partial) inertia += s;
    return inertia;
}

inline KMeansModel lloyd(std::span<const Point> points, std::vector<Point> centroids,
                         const KMeansConfig& cfg) {
    const std::size_t n = points.size();
    const std::size_t k = centroids.size();
    KMeansModel m;
    std::vector<std::uint32_t> labels(n), prev;
    std::vector<double> d2(n);

    for (std::size_t iter = 0;; ++iter) {
        const double inertia = assign_all(points, centroids, labels, d2, cfg.threads);
        m.inertia_history.push_back(inertia);
        if (labels == prev) {
            m.converged = true;  // centroids are already the means of these labels
            break;
        }
        if (iter == cfg.max_iter) break;

        // Per-chunk partial sums, merged in chunk order.
        const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
        std::vector<std::vector<double>> psum(n_chunks, std::vector<double>(3 * k, 0.0));
        parallel_tasks(n_chunks, cfg.threads, [&](std::size_t c) {
            auto& s = psum[c];
            for (std::size_t i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
                s[3 * labels[i]] += points[i].lon;
                s[3 * labels[i] + 1] += points[i].lat;
                s[3 * labels[i] + 2] += 1.0;
            }
        });
        std::vector<double> sum(3 * k, 0.0);
        for (const auto& s : psum)
            for (std::size_t j = 0; j < 3 * k; ++j) sum[j] += s[j];

        std::vector<Point> next(k);
        std::vector<bool> taken(n, false);
        for (std::size_t j = 0; j < k; ++j) {
            if (sum[3 * j + 2] > 0) {
                next[j] = {sum[3 * j] / sum[3 * j + 2], sum[3 * j + 1] / sum[3 * j + 2]};
                continue;
            }
            // Empty cluster: reseed at the point farthest from its centroid.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i)
                if (!taken[i] && d2[i] > far_d) {
                    far_d = d2[i];
                    far = i;
                }
            taken[far] = true;
            next[j] = points[far];
        }
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            shift = std::max(shift, std::sqrt(squared_distance(next[j], centroids[j])));
        centroids = std::move(next);
        prev = labels;
        m.n_iter = iter + 1;
        if (shift < cfg.tol) {
            m.inertia_history.push_back(assign_all(points, centroids, labels, d2, cfg.threads));
            m.converged = true;
            break;
        }
    }
    m.centroids = std::move(centroids);
    m.assignments = std::move(labels);
    m.inertia = m.inertia_history.back();
    return m;
}

}  // namespace detail

inline KMeansModel kmeans_fit(std::span<const Point> input, const KMeansConfig& cfg) {
    if (input.empty()) throw std::invalid_argument("kmeans_fit: empty input");
    if (cfg.k == 0) throw std::invalid_argument("kmeans_fit: k must be positive");

    double lon_scale = 1.0;
    std::vector<Point> scaled;
    std::span<const Point> points = input;
    if (cfg.latitude_correction) {
        double lat = 0.0;
        for (const auto& p : input) lat += p.lat;
        lon_scale = std::cos(lat / static_cast<double>(input.size()) * std::numbers::pi / 180.0);
        scaled.reserve(input.size());
        for (const auto& p : input) scaled.push_back({p.lon * lon_scale, p.lat});
        points = scaled;
    }

    std::optional<KMeansModel> best;
    const std::size_t runs = cfg.init == Init::provided ? 1 : std::max<std::size_t>(1, cfg.n_init);
    std::mt19937_64 seeder(cfg.seed);
    for (std::size_t r = 0; r < runs; ++r) {
        const std::uint64_t run_seed = r == 0 ? cfg.seed : seeder();
        std::vector<Point> init;
        if (cfg.init == Init::provided) {
            if (cfg.initial_centroids.size() != cfg.k)
                throw std::invalid_argument("kmeans_fit: provided centroids must number k");
            for (const auto& c : cfg.initial_centroids) init.push_back({c.lon * lon_scale, c.lat});
        } else {
            init = kmeans_pp_init(points, cfg.k, run_seed);
        }
        auto model = detail::lloyd(points, std::move(init), cfg);
        model.seed = run_seed;
        if (!best || model.inertia < best->inertia) best = std::move(model);
    }
    best->lon_scale = lon_scale;
    for (auto& c : best->centroids) c.lon /= lon_scale;
    return std::move(*best);
}

inline std::uint32_t kmeans_predict(const KMeansModel& model, Point p) {
    if (model.lon_scale == 1.0) return nearest(p, model.centroids);
    std::vector<Point> scaled;
    for (const auto& c : model.centroids) scaled.push_back({c.lon * model.lon_scale, c.lat});
    return nearest({p.lon * model.lon_scale, p.lat}, scaled);
}

inline double inertia_of(std::span<const Point> points, std::span<const Point> centroids,
                         std::span<const std::uint32_t> labels) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += squared_distance(points[i], centroids[labels[i]]);
    return s;
}

// Seeded uniform sample without replacement, returned in input order.
inline std::vector<Point> subsample(std::span<const Point> points, std::size_t max_points,
                                    std::uint64_t seed) {
    if (points.size() <= max_points) return {points.begin(), points.end()};
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(points.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < max_points; ++i) {
        const std::size_t j = i + detail::uniform_index(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(max_points);
    std::sort(idx.begin(), idx.end());
    std::vector<Point> out;
    out.reserve(max_points);
    for (auto i : idx) out.push_back(points[i]);
    return out;
}

inline void write_centroids_csv(std::ostream& out, const KMeansModel& m) {
    out << "cluster,centroid_lon,centroid_lat,size\n";
    std::vector<std::size_t> size(m.centroids.size(), 0);
    for (auto a : m.assignments) ++size[a];
    for (std::size_t j = 0; j < m.centroids.size(); ++j)
        out << j << ',' << csv::format_double(m.centroids[j].lon) << ','
            << csv::format_double(m.centroids[j].lat) << ',' << size[j] << '\n';
}

inline nlohmann::ordered_json to_json(const KMeansModel& m, const KMeansConfig& cfg) {
    return {{"k", cfg.k},
            {"max_iter", cfg.max_iter},
            {"tol", cfg.tol},
            {"seed", m.seed},
            {"n_init", cfg.n_init},
            {"latitude_correction", cfg.latitude_correction},
            {"inertia", m.inertia},
            {"n_iter", m.n_iter},
            {"converged", m.converged},
            {"fit_points", m.assignments.size()}};
}

}  // namespace mobfc::kmeans
