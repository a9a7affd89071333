#include "reface/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace reface::synth {

namespace {

constexpr float kBackground[3] = {-0.85f, -0.85f, -0.8f};
constexpr float kEyeColor[3] = {-0.85f, -0.85f, -0.85f};
constexpr float kMouthColor[3] = {0.45f, -0.55f, -0.5f};
constexpr uint64_t kDefaultIdentityBase = 0xFACE5EEDULL;

float clampf(float v, float lo, float hi) { return std::min(std::max(v, lo), hi); }

float eye_aperture(float openness) {
    return kEyeApertureMin + (kEyeApertureMax - kEyeApertureMin) * clampf(openness, 0.f, 1.f);
}

float mouth_aperture(float open) {
    return kMouthApertureMin + (kMouthApertureMax - kMouthApertureMin) * clampf(open, 0.f, 1.f);
}

// canonical-space color at q for a fully specified face state
void canonical_color(const IdentityParams& id, float eh_l, float eh_r, float mh, double qx,
                     double qy, float out[3]) {
    const double e = (qx / id.ax) * (qx / id.ax) + (qy / id.ay) * (qy / id.ay);
    if (e > 1.0) {
        out[0] = kBackground[0], out[1] = kBackground[1], out[2] = kBackground[2];
        return;
    }
    const float* c = id.skin;
    if (qy < -0.5 * id.ay) c = id.hair;
    for (int side = 0; side < 2; ++side) {
        const double cx = side == 0 ? -id.eye_dx : id.eye_dx;
        const double eh = side == 0 ? eh_l : eh_r;
        const double dx = (qx - cx) / id.eye_w, dy = (qy - kEyeY) / eh;
        if (dx * dx + dy * dy <= 1.0) {
            c = kEyeColor;
            break;
        }
    }
    {
        const double dx = qx / id.mouth_w, dy = (qy - kMouthY) / mh;
        if (dx * dx + dy * dy <= 1.0) c = kMouthColor;
    }
    out[0] = c[0], out[1] = c[1], out[2] = c[2];
}

// canonical landmark list for the given apertures
std::vector<double> canonical_landmarks(const IdentityParams& id, float eh_l, float eh_r,
                                        float mh, int n_lm) {
    std::vector<double> pts;
    pts.reserve(size_t(n_lm) * 2);
    auto push = [&](double x, double y) {
        pts.push_back(x);
        pts.push_back(y);
    };
    push(0, -id.ay);  // forehead
    push(0, id.ay);   // chin
    const int nc = n_lm - 14;
    for (int i = 0; i < nc; ++i) {
        const double th = 2.0 * M_PI * (i + 0.5) / nc;
        push(id.ax * std::sin(th), -id.ay * std::cos(th));
    }
    for (int side = 0; side < 2; ++side) {
        const double cx = side == 0 ? -id.eye_dx : id.eye_dx;
        const double eh = side == 0 ? eh_l : eh_r;
        push(cx - id.eye_w, kEyeY);
        push(cx + id.eye_w, kEyeY);
        push(cx, kEyeY - eh);
        push(cx, kEyeY + eh);
    }
    push(-id.mouth_w, kMouthY);
    push(id.mouth_w, kMouthY);
    push(0, kMouthY - mh);
    push(0, kMouthY + mh);
    return pts;
}

struct Trajectory {
    double base = 0, a1 = 0, f1 = 0, p1 = 0, a2 = 0, f2 = 0, p2 = 0;
    double lo = -1, hi = 1;
    double period = 1;  // frames per dataset cycle

    double eval(double t) const {
        const double v = base + a1 * std::sin(2.0 * M_PI * f1 * t / period + p1) +
                         a2 * std::sin(2.0 * M_PI * f2 * t / period + p2);
        return std::min(std::max(v, lo), hi);
    }
};

Trajectory draw_trajectory(Rng& rng, double base, double a1_lo, double a1_hi, double f1_lo,
                           double f1_hi, double a2_lo, double a2_hi, double f2_lo, double f2_hi,
                           double lo, double hi, double period) {
    Trajectory t;
    t.base = base;
    t.a1 = rng.uniform(a1_lo, a1_hi);
    t.f1 = rng.uniform(f1_lo, f1_hi);
    t.p1 = rng.uniform(0, 2.0 * M_PI);
    t.a2 = rng.uniform(a2_lo, a2_hi);
    t.f2 = rng.uniform(f2_lo, f2_hi);
    t.p2 = rng.uniform(0, 2.0 * M_PI);
    t.lo = lo;
    t.hi = hi;
    t.period = period;
    return t;
}

void append_f6(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), " %.6f", v);
    out += buf;
}

}  // namespace

IdentityParams identity_from_seed(uint64_t seed) {
    Rng rng(seed);
    IdentityParams id;
    id.skin[0] = float(rng.uniform(0.10, 0.75));
    id.skin[1] = float(rng.uniform(-0.10, 0.45));
    id.skin[2] = float(rng.uniform(-0.35, 0.25));
    for (auto& h : id.hair) h = float(rng.uniform(-0.85, 0.55));
    id.ax = float(rng.uniform(0.50, 0.62));
    id.ay = float(rng.uniform(0.68, 0.80));
    id.eye_dx = float(rng.uniform(0.22, 0.30));
    id.eye_w = float(rng.uniform(0.09, 0.13));
    id.mouth_w = float(rng.uniform(0.18, 0.28));
    return id;
}

std::vector<IdentityParams> default_identities() {
    std::vector<IdentityParams> ids;
    ids.reserve(6);
    for (int i = 0; i < 6; ++i) ids.push_back(identity_from_seed(Rng::mix(kDefaultIdentityBase, uint64_t(i))));
    return ids;
}

Affine pose_affine(float yaw, float pitch, float roll) {
    const double s00 = 0.25 + 0.75 * std::cos(double(yaw));
    const double s01 = 0.15 * std::sin(double(pitch));
    const double s10 = 0.15 * std::sin(double(yaw));
    const double s11 = 0.25 + 0.75 * std::cos(double(pitch));
    const double tx = 0.15 * std::sin(double(yaw));
    const double ty = 0.15 * std::sin(double(pitch));
    const double cr = std::cos(double(roll)), sr = std::sin(double(roll));
    Affine a;
    a.m00 = kSceneScale * (cr * s00 - sr * s10);
    a.m01 = kSceneScale * (cr * s01 - sr * s11);
    a.m10 = kSceneScale * (sr * s00 + cr * s10);
    a.m11 = kSceneScale * (sr * s01 + cr * s11);
    a.tx = kSceneScale * (cr * tx - sr * ty);
    a.ty = kSceneScale * (sr * tx + cr * ty);
    return a;
}

Affine invert(const Affine& a) {
    const double det = a.m00 * a.m11 - a.m01 * a.m10;
    if (std::abs(det) < 1e-9) fail_value("pose transform is singular");
    Affine inv;
    inv.m00 = a.m11 / det;
    inv.m01 = -a.m01 / det;
    inv.m10 = -a.m10 / det;
    inv.m11 = a.m00 / det;
    inv.tx = -(inv.m00 * a.tx + inv.m01 * a.ty);
    inv.ty = -(inv.m10 * a.tx + inv.m11 * a.ty);
    return inv;
}

Tensor<float> render_face(const IdentityParams& id, const DriveSignal& drive, int resolution,
                          int n_lm, std::vector<float>* landmarks) {
    if (resolution < 8) fail_value("render_face: resolution too small: ", resolution);
    if (n_lm < 14) fail_value("render_face: need at least 14 landmarks, got ", n_lm);

    const float eh_l = eye_aperture(drive.blink_l);
    const float eh_r = eye_aperture(drive.blink_r);
    const float mh = mouth_aperture(drive.mouth_open);
    const Affine fwd = pose_affine(drive.yaw, drive.pitch, drive.roll);
    const Affine inv = invert(fwd);

    Tensor<float> img({3, resolution, resolution});
    float* px = img.ptr();
    const double step = 2.0 / resolution;
    const double sub[2] = {0.25, 0.75};
    float rgb[3];
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            double acc[3] = {0, 0, 0};
            for (double sy : sub)
                for (double sx : sub) {
                    const double ix = (x + sx) * step - 1.0;
                    const double iy = (y + sy) * step - 1.0;
                    double qx, qy;
                    inv.apply(ix, iy, qx, qy);
                    canonical_color(id, eh_l, eh_r, mh, qx, qy, rgb);
                    acc[0] += rgb[0], acc[1] += rgb[1], acc[2] += rgb[2];
                }
            const size_t at = size_t(y) * resolution + x;
            const size_t plane = size_t(resolution) * resolution;
            px[at] = float(acc[0] * 0.25);
            px[plane + at] = float(acc[1] * 0.25);
            px[2 * plane + at] = float(acc[2] * 0.25);
        }
    }

    if (landmarks) {
        auto pts = canonical_landmarks(id, eh_l, eh_r, mh, n_lm);
        landmarks->reserve(landmarks->size() + pts.size());
        for (size_t i = 0; i < pts.size(); i += 2) {
            double ox, oy;
            fwd.apply(pts[i], pts[i + 1], ox, oy);
            landmarks->push_back(float(ox));
            landmarks->push_back(float(oy));
        }
    }
    return img;
}

Tensor<float> render_reference(const IdentityParams& id, int resolution, int n_lm,
                               std::vector<float>* landmarks) {
    DriveSignal neutral;
    neutral.blink_l = neutral.blink_r = 1.0f;
    neutral.mouth_open = 0.2f;
    return render_face(id, neutral, resolution, n_lm, landmarks);
}

std::array<metrics::Box, 2> eye_boxes(const IdentityParams& id, const DriveSignal& drive,
                                      int resolution) {
    const Affine fwd = pose_affine(drive.yaw, drive.pitch, drive.roll);
    std::array<metrics::Box, 2> out;
    for (int side = 0; side < 2; ++side) {
        const double cx = side == 0 ? -id.eye_dx : id.eye_dx;
        double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
        for (int corner = 0; corner < 4; ++corner) {
            const double qx = cx + (corner & 1 ? id.eye_w : -id.eye_w);
            const double qy = kEyeY + (corner & 2 ? kEyeApertureMax : -kEyeApertureMax);
            double ox, oy;
            fwd.apply(qx, qy, ox, oy);
            min_x = std::min(min_x, ox), max_x = std::max(max_x, ox);
            min_y = std::min(min_y, oy), max_y = std::max(max_y, oy);
        }
        auto to_px = [&](double v) {
            return std::clamp(int(std::floor((v + 1.0) * 0.5 * resolution)), 0, resolution - 1);
        };
        out[size_t(side)] = {to_px(min_x), to_px(min_y), to_px(max_x), to_px(max_y)};
    }
    return out;
}

Tensor<float> skin_mask(const IdentityParams& id, const DriveSignal& drive, int resolution) {
    const Affine inv = invert(pose_affine(drive.yaw, drive.pitch, drive.roll));
    Tensor<float> mask({1, resolution, resolution});
    float* m = mask.ptr();
    const double step = 2.0 / resolution;
    const double margin = 0.05;
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            double qx, qy;
            inv.apply((x + 0.5) * step - 1.0, (y + 0.5) * step - 1.0, qx, qy);
            const double e = (qx / id.ax) * (qx / id.ax) + (qy / id.ay) * (qy / id.ay);
            bool skin = e <= 0.8 * 0.8;
            skin = skin && qy > -0.5 * id.ay + margin;  // below the hair line
            for (int side = 0; side < 2 && skin; ++side) {
                const double cx = side == 0 ? -id.eye_dx : id.eye_dx;
                if (std::abs(qx - cx) <= id.eye_w + margin &&
                    std::abs(qy - kEyeY) <= kEyeApertureMax + margin)
                    skin = false;
            }
            if (skin && std::abs(qx) <= id.mouth_w + margin &&
                std::abs(qy - kMouthY) <= kMouthApertureMax + margin)
                skin = false;
            m[size_t(y) * resolution + x] = skin ? 1.0f : 0.0f;
        }
    return mask;
}

Tensor<float> gen_audio_feature(const std::vector<float>& mouth, uint64_t seed) {
    if (mouth.empty()) fail_value("gen_audio_feature: empty trajectory");
    const int t_nodes = int(mouth.size());
    Tensor<float> out({t_nodes, kAudioChannels});
    float* p = out.ptr();
    Rng rng(seed);
    for (int t = 0; t < t_nodes; ++t) {
        const double m = clampf(mouth[size_t(t)], 0.f, 1.f);
        float* row = p + size_t(t) * kAudioChannels;
        row[0] = float(0.8 * std::sin(1.7 * m + 0.3));
        row[1] = float(0.6 * std::cos(2.3 * m - 0.5));
        row[2] = float(std::tanh(2.0 * m - 1.0));
        row[3] = float(m * m - 0.5 * m);
        row[4] = float(0.5 * std::sin(3.1 * m) + 0.2 * m);
        row[5] = float(1.0 / (1.0 + std::exp(-4.0 * (m - 0.5))) - 0.5);
        row[6] = float(0.7 * m * (1.0 - m));
        row[7] = float(0.3 * std::cos(1.3 * m) - 0.4 * m);
        for (int ch = 8; ch < kAudioChannels; ++ch) row[ch] = float(rng.uniform(-0.5, 0.5));
    }
    return out;
}

Dataset make_dataset(uint64_t seed, int n_identities, int frames_per_identity, int resolution,
                     int n_lm, int t_nodes) {
    if (n_identities < 1 || frames_per_identity < 1)
        fail_value("make_dataset: need at least one identity and frame, got ", n_identities, "x",
                   frames_per_identity);
    if (t_nodes < 1) fail_value("make_dataset: audio needs at least one time node");
    if (n_lm < 14) fail_value("make_dataset: need at least 14 landmarks, got ", n_lm);

    Dataset ds;
    ds.seed = seed;
    ds.resolution = resolution;
    ds.n_lm = n_lm;
    ds.t_nodes = t_nodes;
    ds.frames_per_identity = frames_per_identity;

    auto defaults = default_identities();
    for (int i = 0; i < n_identities; ++i)
        ds.identities.push_back(i < int(defaults.size())
                                    ? defaults[size_t(i)]
                                    : identity_from_seed(Rng::mix(seed, 1000 + uint64_t(i))));

    for (int i = 0; i < n_identities; ++i) {
        const IdentityParams& id = ds.identities[size_t(i)];
        ds.references.push_back(render_reference(id, resolution, n_lm));

        Rng rng(Rng::mix(seed, uint64_t(i)));
        const double period = frames_per_identity;
        Trajectory yaw = draw_trajectory(rng, 0, 0.15, 0.30, 0.5, 1.5, 0.05, 0.12, 2, 4, -0.45,
                                         0.45, period);
        Trajectory pitch = draw_trajectory(rng, 0, 0.15, 0.30, 0.5, 1.5, 0.05, 0.12, 2, 4, -0.45,
                                           0.45, period);
        Trajectory roll = draw_trajectory(rng, 0, 0.10, 0.20, 0.5, 1.5, 0.03, 0.08, 2, 4, -0.30,
                                          0.30, period);
        Trajectory blink = draw_trajectory(rng, 0.5, 0.45, 0.60, 1.0, 2.5, 0.15, 0.30, 3, 6, 0, 1,
                                           period);
        Trajectory blink_delta = draw_trajectory(rng, 0, 0.02, 0.08, 2, 5, 0.0, 0.02, 5, 9, -0.1,
                                                 0.1, period);
        Trajectory mouth = draw_trajectory(rng, 0.5, 0.35, 0.45, 1.5, 3.5, 0.15, 0.25, 4, 8, 0, 1,
                                           period);

        for (int fr = 0; fr < frames_per_identity; ++fr) {
            Sample s;
            s.identity = i;
            s.frame = fr;
            s.drive.yaw = float(yaw.eval(fr));
            s.drive.pitch = float(pitch.eval(fr));
            s.drive.roll = float(roll.eval(fr));
            s.drive.blink_l = float(blink.eval(fr));
            s.drive.blink_r = clampf(float(blink.eval(fr) + blink_delta.eval(fr)), 0.f, 1.f);
            s.drive.mouth_open = float(mouth.eval(fr));

            std::vector<float> traj(static_cast<size_t>(t_nodes));
            for (int j = 0; j < t_nodes; ++j)
                traj[size_t(j)] = float(mouth.eval(fr + (j - (t_nodes - 1) * 0.5) * 0.25));
            s.drive.audio = gen_audio_feature(traj, Rng::mix(Rng::mix(seed, 0xAD10 + uint64_t(i)),
                                                             uint64_t(fr)));

            s.target = render_face(ds.identities[size_t(i)], s.drive, resolution, n_lm,
                                   &s.landmarks);
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

std::string manifest_text(const Dataset& ds) {
    std::string out;
    out += "# reface-dataset 1\n";
    out += str("# seed ", ds.seed, "\n");
    out += str("# identities ", ds.identities.size(), "\n");
    out += str("# frames ", ds.frames_per_identity, "\n");
    out += str("# resolution ", ds.resolution, "\n");
    out += str("# landmarks ", ds.n_lm, "\n");
    out += str("# audio_nodes ", ds.t_nodes, "\n");
    for (const auto& s : ds.samples) {
        out += str(s.identity, " ", s.frame);
        append_f6(out, s.drive.yaw);
        append_f6(out, s.drive.pitch);
        append_f6(out, s.drive.roll);
        append_f6(out, s.drive.blink_l);
        append_f6(out, s.drive.blink_r);
        append_f6(out, s.drive.mouth_open);
        for (float v : s.landmarks) append_f6(out, v);
        out += "\n";
    }
    return out;
}

ManifestHeader read_manifest_header(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_value("cannot open manifest '", path, "'");
    ManifestHeader h;
    std::string line;
    int rows = 0;
    bool tagged = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "reface-dataset")
                tagged = true;
            else if (key == "seed")
                ss >> h.seed;
            else if (key == "identities")
                ss >> h.identities;
            else if (key == "frames")
                ss >> h.frames;
            else if (key == "resolution")
                ss >> h.resolution;
            else if (key == "landmarks")
                ss >> h.n_lm;
            else if (key == "audio_nodes")
                ss >> h.t_nodes;
            continue;
        }
        ++rows;
    }
    if (!tagged) fail_value("'", path, "' is not a dataset manifest");
    if (h.identities < 1 || h.frames < 1 || h.resolution < 8 || h.n_lm < 14 || h.t_nodes < 1)
        fail_value("manifest '", path, "' has an incomplete header");
    if (rows != h.identities * h.frames)
        fail_value("manifest '", path, "' has ", rows, " rows, expected ",
                   h.identities * h.frames);
    return h;
}

}  // namespace reface::synth
