#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "reface/metrics.hpp"
#include "reface/rng.hpp"
#include "reface/tensor.hpp"

namespace reface::synth {

inline constexpr int kAudioChannels = 32;  // 0-7 signal mixtures, 8-31 noise

// Canonical scene constants (normalized [-1,1] coordinates before the pose
// transform): eye/mouth vertical centers and the aperture ranges.
inline constexpr float kEyeY = -0.2f;
inline constexpr float kEyeApertureMin = 0.015f;
inline constexpr float kEyeApertureMax = 0.1f;
inline constexpr float kMouthY = 0.4f;
inline constexpr float kMouthApertureMin = 0.02f;
inline constexpr float kMouthApertureMax = 0.2f;
inline constexpr float kSceneScale = 0.85f;  // keeps posed landmarks inside [-1,1]

struct IdentityParams {
    float skin[3];
    float hair[3];
    float ax, ay;     // face ellipse semi-axes
    float eye_dx;     // eye horizontal offset from center
    float eye_w;      // eye half-width
    float mouth_w;    // mouth half-width
};

IdentityParams identity_from_seed(uint64_t seed);
// The six fixed identities used by default (visually separable, see tests).
std::vector<IdentityParams> default_identities();

struct DriveSignal {
    float yaw = 0, pitch = 0, roll = 0;  // radians
    float blink_l = 1, blink_r = 1;      // openness in [0,1]
    float mouth_open = 0;                // [0,1]
    Tensor<float> audio;                 // [T, kAudioChannels]; empty until generated
};

// p_image = kSceneScale * R(roll) * (S(yaw,pitch) * q + t(yaw,pitch));
// S is a shear-scale, so landmarks stay analytically exact under pose.
struct Affine {
    double m00 = 1, m01 = 0, m10 = 0, m11 = 1, tx = 0, ty = 0;
    void apply(double x, double y, double& ox, double& oy) const {
        ox = m00 * x + m01 * y + tx;
        oy = m10 * x + m11 * y + ty;
    }
};
Affine pose_affine(float yaw, float pitch, float roll);
Affine invert(const Affine& a);

// Rasterizes the face (2x2 supersampling) and returns the image [3,R,R];
// appends the 2*n_lm transformed landmark coordinates to *landmarks if given.
// Landmark order: forehead, chin, n_lm-14 contour points, 4 per eye
// (outer/inner corner, upper/lower lid), 4 mouth (corners, upper/lower lip).
Tensor<float> render_face(const IdentityParams& id, const DriveSignal& drive, int resolution,
                          int n_lm, std::vector<float>* landmarks = nullptr);

// Neutral-pose render used as the identity's reference frame.
Tensor<float> render_reference(const IdentityParams& id, int resolution, int n_lm,
                               std::vector<float>* landmarks = nullptr);

// Pixel-space bounding boxes of the two (maximum-aperture) eye regions under
// the drive's pose — the analytic oracle for the blink-decoupling tests.
std::array<metrics::Box, 2> eye_boxes(const IdentityParams& id, const DriveSignal& drive,
                                      int resolution);

// 1 where the pixel shows bare skin (face interior below the hair line,
// away from eyes/mouth), else 0. Shape [1,R,R].
Tensor<float> skin_mask(const IdentityParams& id, const DriveSignal& drive, int resolution);

// mouth trajectory over T nodes -> [T, kAudioChannels]: channels 0-7 are
// fixed smooth nonlinear mixtures of the trajectory, 8-31 seeded noise.
Tensor<float> gen_audio_feature(const std::vector<float>& mouth, uint64_t seed);

struct Sample {
    int identity = 0;
    int frame = 0;
    DriveSignal drive;
    std::vector<float> landmarks;  // 2*n_lm, interleaved (x,y)
    Tensor<float> target;          // [3,R,R]
};

struct Dataset {
    uint64_t seed = 0;
    int resolution = 0;
    int n_lm = 0;
    int t_nodes = 0;
    int frames_per_identity = 0;
    std::vector<IdentityParams> identities;
    std::vector<Tensor<float>> references;  // one neutral render per identity
    std::vector<Sample> samples;            // identity-major, frame order
};

// Smooth seeded trajectories per identity; identities come from the fixed
// default list (extended deterministically from the seed past six).
Dataset make_dataset(uint64_t seed, int n_identities, int frames_per_identity, int resolution,
                     int n_lm, int t_nodes);

// '#'-prefixed header (seed/ids/frames/resolution/landmarks/audio_nodes),
// then one sample per line: id frame yaw pitch roll blink_l blink_r mouth
// followed by the landmark coordinates, floats with 6 decimals.
std::string manifest_text(const Dataset& ds);

struct ManifestHeader {
    uint64_t seed = 0;
    int identities = 0;
    int frames = 0;
    int resolution = 0;
    int n_lm = 0;
    int t_nodes = 0;
};
// Parses the header of a manifest written by manifest_text; validates the
// row count against it.
ManifestHeader read_manifest_header(const std::string& path);

}  // namespace reface::synth
