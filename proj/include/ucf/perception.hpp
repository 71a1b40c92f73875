#pragma once

// Identity initialization: simulated face/person detectors driven by world
// ground truth, a 128-d embedding space with a Euclidean accept threshold,
// and face-to-body association by highest IOU. The accepted body box seeds
// the tracker.

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ucf/common.hpp"
#include "ucf/geometry.hpp"
#include "ucf/sim.hpp"

namespace ucf {

inline constexpr std::size_t kEmbeddingDim = 128;
inline constexpr double kFaceRange = 4.0;        // m, detector reach
inline constexpr double kFaceNoiseSigma = 0.05;  // embedding noise scale
inline constexpr double kVerifyThreshold = 0.9;
inline constexpr double kPersonJitter = 0.02;    // per-edge, fraction of box size
inline constexpr double kHeadVisibleFraction = 0.5;

struct FaceEmbedding {
    std::array<double, kEmbeddingDim> values{};
};

inline void validate_embedding(const FaceEmbedding& e) {
    double sq = 0.0;
    for (double v : e.values) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) >= 1e-9)
        throw ContractError("face embedding must have unit norm");
}

inline double face_distance(const FaceEmbedding& a, const FaceEmbedding& b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        const double d = a.values[i] - b.values[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

inline FaceEmbedding normalized(FaceEmbedding e) {
    double sq = 0.0;
    for (double v : e.values) sq += v * v;
    if (sq <= 0.0) throw ContractError("cannot normalize a zero embedding");
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : e.values) v *= inv;
    return e;
}

// Latent identity per agent: the target's vector plus distractor vectors
// orthogonalized against everything before them, so distinct identities sit
// at distance sqrt(2) and the face stage is never the weak link.
inline std::vector<FaceEmbedding> identity_latents(std::size_t count, std::uint64_t seed) {
    auto rng = make_rng(seed, "face-latents");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<FaceEmbedding> latents;
    for (std::size_t n = 0; n < count; ++n) {
        FaceEmbedding e;
        for (double& v : e.values) v = gauss(rng);
        for (const FaceEmbedding& prev : latents) {
            double dot = 0.0;
            for (std::size_t i = 0; i < kEmbeddingDim; ++i) dot += e.values[i] * prev.values[i];
            for (std::size_t i = 0; i < kEmbeddingDim; ++i) e.values[i] -= dot * prev.values[i];
        }
        latents.push_back(normalized(e));
    }
    return latents;
}

inline FaceEmbedding noisy_embedding(const FaceEmbedding& latent, double sigma,
                                     std::mt19937_64& rng) {
    FaceEmbedding e = latent;
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double& v : e.values) v += gauss(rng);
    return normalized(e);
}

struct Detection {
    enum class Kind { face, person };
    BoundingBox box{0.0, 0.0, 1.0, 1.0};
    Kind kind = Kind::person;
    std::size_t agent_id_hidden = 0;  // simulator-side label, never used downstream
};

struct FaceObservation {
    Detection detection;
    FaceEmbedding embedding;
};

struct IdentityGallery {
    FaceEmbedding target_embedding;
    double threshold = kVerifyThreshold;
};

inline void validate_gallery(const IdentityGallery& g) {
    if (g.threshold <= 0.0) throw ContractError("gallery threshold must be positive");
    validate_embedding(g.target_embedding);
}

namespace detail {

// Full projected body box (occlusion ignored), clipped to the frame and
// quantized to the pixels it covers, like the annotation boxes.
inline std::optional<BoundingBox> projected_body_box(const WorldState& world,
                                                     const CameraModel& cam,
                                                     std::size_t index) {
    const auto rect = project_agent(world.robot, cam, world.agents[index]);
    if (!rect) return std::nullopt;
    const long W = static_cast<long>(cam.image_w), H = static_cast<long>(cam.image_h);
    const long px_lo = std::max(first_center(rect->u1), 0L);
    const long px_hi = std::min(first_center(rect->u2) - 1, W - 1);
    const long py_lo = std::max(first_center(rect->v1), 0L);
    const long py_hi = std::min(first_center(rect->v2) - 1, H - 1);
    if (px_lo > px_hi || py_lo > py_hi) return std::nullopt;
    return BoundingBox(static_cast<double>(px_lo) / static_cast<double>(W),
                       static_cast<double>(py_lo) / static_cast<double>(H),
                       static_cast<double>(px_hi + 1) / static_cast<double>(W),
                       static_cast<double>(py_hi + 1) / static_cast<double>(H));
}

// Fraction of the agent's head-band pixels that survive occlusion by nearer
// billboards (frustum-clipped pixels count as missing).
inline double head_visible_fraction(const WorldState& world, const CameraModel& cam,
                                    std::size_t index) {
    const auto rect = project_agent(world.robot, cam, world.agents[index]);
    if (!rect) return 0.0;
    const long W = static_cast<long>(cam.image_w), H = static_cast<long>(cam.image_h);
    const long full_px_lo = first_center(rect->u1), full_px_hi = first_center(rect->u2) - 1;
    const long full_py_lo = first_center(rect->v1);
    const long full_py_hi = first_center(rect->head_v_end) - 1;
    const double total = static_cast<double>(full_px_hi - full_px_lo + 1) *
                         static_cast<double>(full_py_hi - full_py_lo + 1);
    if (full_px_lo > full_px_hi || full_py_lo > full_py_hi) return 0.0;

    std::vector<std::optional<BillboardRect>> rects;
    for (const Agent& a : world.agents) rects.push_back(project_agent(world.robot, cam, a));

    long visible = 0;
    for (long py = std::max(full_py_lo, 0L); py <= std::min(full_py_hi, H - 1); ++py) {
        const double vc = static_cast<double>(py) + 0.5;
        for (long px = std::max(full_px_lo, 0L); px <= std::min(full_px_hi, W - 1); ++px) {
            const double uc = static_cast<double>(px) + 0.5;
            bool wins = true;
            for (std::size_t j = 0; j < rects.size() && wins; ++j) {
                if (j == index || !rects[j]) continue;
                const auto& o = *rects[j];
                if (uc < o.u1 || uc >= o.u2 || vc < o.v1 || vc >= o.v2) continue;
                if (o.z < rect->z || (o.z == rect->z && j < index)) wins = false;
            }
            if (wins) ++visible;
        }
    }
    return static_cast<double>(visible) / total;
}

}  // namespace detail

inline BoundingBox face_box_of(const BoundingBox& body) {
    return BoundingBox(body.x1, body.y1, body.x2,
                       body.y1 + kHeadBandFraction * (body.y2 - body.y1));
}

// One face observation per agent whose face is toward the camera, whose head
// band survives occlusion, and who stands within detector range. Pass a null
// rng for noiseless embeddings.
inline std::vector<FaceObservation> simulate_face_detections(
    const WorldState& world, const CameraModel& cam,
    const std::vector<FaceEmbedding>& latents, std::mt19937_64* rng = nullptr,
    double sigma = kFaceNoiseSigma, double max_range = kFaceRange) {
    std::vector<FaceObservation> out;
    for (std::size_t i = 0; i < world.agents.size(); ++i) {
        const Agent& a = world.agents[i];
        if (static_cast<std::size_t>(a.latent_id) >= latents.size())
            throw ContractError("agent latent id outside the identity gallery");
        const double range = std::hypot(a.pos.x - world.robot.x, a.pos.y - world.robot.y);
        if (range > max_range) continue;
        if (!detail::agent_faces_camera(world.robot, a)) continue;
        if (detail::head_visible_fraction(world, cam, i) < kHeadVisibleFraction) continue;
        const auto body = detail::projected_body_box(world, cam, i);
        if (!body) continue;

        FaceObservation obs;
        obs.detection.box = face_box_of(*body);
        obs.detection.kind = Detection::Kind::face;
        obs.detection.agent_id_hidden = i;
        const FaceEmbedding& latent = latents[static_cast<std::size_t>(a.latent_id)];
        obs.embedding = rng != nullptr ? noisy_embedding(latent, sigma, *rng) : latent;
        out.push_back(obs);
    }
    return out;
}

// Person detector: ground-truth visible boxes with a small deterministic
// jitter on each edge (up to 2% of the box size).
inline std::vector<Detection> simulate_person_detections(const WorldState& world,
                                                         const CameraModel& cam,
                                                         std::mt19937_64* rng = nullptr,
                                                         double jitter = kPersonJitter) {
    std::vector<Detection> out;
    std::uniform_real_distribution<double> uni(-jitter, jitter);
    for (std::size_t i = 0; i < world.agents.size(); ++i) {
        const auto box = ground_truth_bbox(world, cam, i);
        if (!box) continue;
        double x1 = box->x1, y1 = box->y1, x2 = box->x2, y2 = box->y2;
        if (rng != nullptr) {
            const double w = box->width(), h = box->height();
            x1 = std::clamp(x1 + uni(*rng) * w, 0.0, 1.0);
            x2 = std::clamp(x2 + uni(*rng) * w, 0.0, 1.0);
            y1 = std::clamp(y1 + uni(*rng) * h, 0.0, 1.0);
            y2 = std::clamp(y2 + uni(*rng) * h, 0.0, 1.0);
        }
        Detection det;
        det.box = BoundingBox(x1, y1, x2, y2);
        det.kind = Detection::Kind::person;
        det.agent_id_hidden = i;
        out.push_back(det);
    }
    return out;
}

inline bool verify_face(const FaceEmbedding& candidate, const IdentityGallery& gallery) {
    validate_embedding(candidate);
    return face_distance(candidate, gallery.target_embedding) < gallery.threshold;
}

// Highest-IOU body for the face; ties keep the lowest index, and a face that
// overlaps nothing matches nothing.
inline std::optional<std::size_t> match_face_to_body(const BoundingBox& face_box,
                                                     const std::vector<BoundingBox>& bodies) {
    if (bodies.empty()) throw ContractError("match_face_to_body: no person detections");
    double best = 0.0;
    std::optional<std::size_t> best_idx;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        const double v = iou(face_box, bodies[i]);
        if (v > best) {
            best = v;
            best_idx = i;
        }
    }
    return best_idx;
}

// Full chain: verified face with the smallest embedding distance, matched to
// a detected body; the body box is what the tracker is initialized with.
inline std::optional<BoundingBox> initialize_target(const WorldState& world,
                                                    const CameraModel& cam,
                                                    const IdentityGallery& gallery,
                                                    const std::vector<FaceEmbedding>& latents,
                                                    std::mt19937_64* rng = nullptr,
                                                    double sigma = kFaceNoiseSigma,
                                                    double max_range = kFaceRange,
                                                    double jitter = kPersonJitter) {
    validate_gallery(gallery);
    const auto faces = simulate_face_detections(world, cam, latents, rng, sigma, max_range);
    const FaceObservation* best = nullptr;
    double best_dist = gallery.threshold;
    for (const FaceObservation& f : faces) {
        const double d = face_distance(f.embedding, gallery.target_embedding);
        if (d < best_dist) {
            best_dist = d;
            best = &f;
        }
    }
    if (best == nullptr) return std::nullopt;

    const auto persons = simulate_person_detections(world, cam, rng, jitter);
    if (persons.empty()) return std::nullopt;
    std::vector<BoundingBox> boxes;
    boxes.reserve(persons.size());
    for (const Detection& d : persons) boxes.push_back(d.box);
    const auto idx = match_face_to_body(best->detection.box, boxes);
    if (!idx) return std::nullopt;
    return boxes[*idx];
}

// --------------------------------------------------------------------------
// gallery file: one line of 128 space-separated decimals (the target latent)

inline void save_gallery(const std::string& path, const FaceEmbedding& target) {
    std::ofstream out(path);
    if (!out) throw ContractError("cannot write gallery file: " + path);
    out.precision(17);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        if (i > 0) out << ' ';
        out << target.values[i];
    }
    out << '\n';
}

inline IdentityGallery load_gallery(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot read gallery file: " + path);
    IdentityGallery g;
    for (double& v : g.target_embedding.values)
        if (!(in >> v)) throw ContractError("gallery file must hold 128 floats: " + path);
    validate_gallery(g);
    return g;
}

}  // namespace ucf
