// pybind11 surface: the main operations (convolutions, dynamic convolution,
// metrics, synthetic rendering, gradient checks) plus checkpoint-backed
// inference. Everything crosses the boundary as float32 numpy arrays.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <string>
#include <vector>

#include "reface/adaconv.hpp"
#include "reface/checkpoint.hpp"
#include "reface/gradsuite.hpp"
#include "reface/metrics.hpp"
#include "reface/ops.hpp"
#include "reface/run_config.hpp"
#include "reface/synth.hpp"
#include "reface/trainer.hpp"

namespace py = pybind11;
using namespace reface;

namespace {

using farray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor<float> to_tensor(const farray& a) {
    Shape s;
    for (py::ssize_t i = 0; i < a.ndim(); ++i) s.push_back(int(a.shape(i)));
    Tensor<float> t(s);
    std::copy_n(a.data(), size_t(t.numel()), t.ptr());
    return t;
}

farray to_array(const Tensor<float>& t) {
    std::vector<py::ssize_t> dims(t.shape().begin(), t.shape().end());
    farray out(dims);
    std::copy_n(t.ptr(), size_t(t.numel()), out.mutable_data());
    return out;
}

Tensor<float> with_batch_dim(const Tensor<float>& t) {
    Shape s = t.shape();
    s.insert(s.begin(), 1);
    return reshape(t, s);
}

Tensor<float> drop_batch_dim(const Tensor<float>& t) {
    Shape s(t.shape().begin() + 1, t.shape().end());
    return reshape(t, s);
}

synth::DriveSignal drive_from_args(float yaw, float pitch, float roll, float blink_l,
                                   float blink_r, float mouth) {
    synth::DriveSignal d;
    d.yaw = yaw, d.pitch = pitch, d.roll = roll;
    d.blink_l = blink_l, d.blink_r = blink_r;
    d.mouth_open = mouth;
    return d;
}

// Checkpoint- or config-backed inference model.
struct Model {
    cli::RunConfig cfg;
    train::Trainer<float> trainer;

    static Model from_config_text(const std::string& text) {
        Model m;
        m.cfg = cli::parse_config_text(text);
        m.cfg.validate();
        Rng rng(m.cfg.seed);
        train::Generator<float> gen(rng, m.cfg.fuser_cfg(), m.cfg.reenactor_cfg());
        train::Critic<float> critic(rng, m.cfg.critic_cfg());
        m.trainer = train::Trainer<float>(std::move(gen), std::move(critic), m.cfg.loss_weights(),
                                          m.cfg.lr, Rng::mix(m.cfg.seed, 77));
        return m;
    }

    static Model from_checkpoint(const std::string& path) {
        std::string text;
        for (const auto& e : train::load_checkpoint_file(path))
            if (e.name == "__config__") text.assign(e.bytes.begin(), e.bytes.end());
        if (text.empty()) fail_value("checkpoint '", path, "' carries no config echo");
        Model m = from_config_text(text);
        m.trainer.load(path);
        return m;
    }

    // audio [T,F] or [N,T,F]; pose [3]/[N,3]; eye [2]/[N,2]; ref [3,H,W]/[N,3,H,W]
    py::tuple forward(const farray& audio, const farray& pose, const farray& eye,
                      const farray& ref) const {
        NoGradGuard no_grad;
        const bool batched = audio.ndim() == 3;
        Tensor<float> a = to_tensor(audio), p = to_tensor(pose), e = to_tensor(eye),
                      r = to_tensor(ref);
        if (!batched) {
            a = with_batch_dim(a);
            p = with_batch_dim(p);
            e = with_batch_dim(e);
            r = with_batch_dim(r);
        }
        auto out = trainer.generator().forward(a, p, e, r);
        Tensor<float> f_geo = out.f_geo, image = out.image;
        if (!batched) {
            f_geo = drop_batch_dim(f_geo);
            image = drop_batch_dim(image);
        }
        return py::make_tuple(to_array(f_geo), to_array(image));
    }

    farray reenact(const farray& audio, const farray& pose, const farray& eye,
                   const farray& ref) const {
        return forward(audio, pose, eye, ref)[1].cast<farray>();
    }

    int64_t count_params() {
        ParamList<float> pl;
        trainer.generator().collect(pl);
        return metrics::count_params(pl);
    }

    int resolution() const { return cfg.resolution; }
    int audio_nodes() const { return cfg.audio_nodes; }
    int landmarks() const { return cfg.landmarks; }
    int64_t step_count() const { return trainer.step_count(); }
    std::string config_text() const { return cli::config_text(cfg); }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "audio-driven multi-face reenactment: tensor ops, metrics, synthetic data, "
              "checkpoint inference";

    py::register_exception<ValueError>(m, "ValueError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

    m.def(
        "conv2d",
        [](const farray& x, const farray& w, const farray& b, int stride, int padding,
           int groups) {
            NoGradGuard no_grad;
            return to_array(conv2d(to_tensor(x), to_tensor(w), to_tensor(b), stride, padding,
                                   groups));
        },
        py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("padding") = 0, py::arg("groups") = 1,
        "grouped 2-d convolution: x [N,C,H,W], weight [Cout,C/groups,Kh,Kw], bias [Cout]");

    m.def(
        "conv1d",
        [](const farray& x, const farray& w, const farray& b, int stride, int padding) {
            NoGradGuard no_grad;
            return to_array(conv1d(to_tensor(x), to_tensor(w), to_tensor(b), stride, padding));
        },
        py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("padding") = 0, "1-d convolution: x [N,C,T], weight [Cout,C,K], bias [Cout]");

    m.def(
        "ada_conv",
        [](const farray& x, const farray& weight, const farray& bias, int k, int cg) {
            NoGradGuard no_grad;
            ada::AdaConvSpec spec;
            spec.k = k;
            spec.cg = cg;
            if (x.ndim() != 4) fail_value("ada_conv: x must be [N,C,H,W]");
            spec.c = int(x.shape(1));
            ada::GeneratedParams<float> gp{to_tensor(weight), to_tensor(bias)};
            return to_array(ada::ada_conv(to_tensor(x), gp, spec));
        },
        py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("k"), py::arg("cg") = 1,
        "per-sample generated convolution: weight [N*C,cg,k,k], bias [N*C]");

    m.def(
        "ssim",
        [](const farray& a, const farray& b) { return metrics::ssim(to_tensor(a), to_tensor(b)); },
        py::arg("a"), py::arg("b"), "windowed structural similarity over [3,H,W] in [-1,1]");

    m.def(
        "landmark_error",
        [](const farray& a, const farray& b) {
            return metrics::landmark_error(to_tensor(a), to_tensor(b));
        },
        py::arg("predicted"), py::arg("truth"),
        "mean euclidean distance over interleaved (x,y) pairs");

    m.def(
        "region_l1",
        [](const farray& a, const farray& b,
           const std::vector<std::tuple<int, int, int, int>>& boxes) {
            std::vector<metrics::Box> bs;
            for (const auto& [x0, y0, x1, y1] : boxes) bs.push_back({x0, y0, x1, y1});
            return metrics::region_l1(to_tensor(a), to_tensor(b), bs);
        },
        py::arg("a"), py::arg("b"), py::arg("boxes"),
        "mean |a-b| inside the box union vs outside; boxes are inclusive (x0,y0,x1,y1)");

    m.def(
        "render_face",
        [](uint64_t identity_seed, int resolution, int n_lm, float yaw, float pitch, float roll,
           float blink_l, float blink_r, float mouth) {
            const synth::IdentityParams id = synth::identity_from_seed(identity_seed);
            std::vector<float> lm;
            const Tensor<float> img = synth::render_face(
                id, drive_from_args(yaw, pitch, roll, blink_l, blink_r, mouth), resolution, n_lm,
                &lm);
            farray lma(py::ssize_t(lm.size()));
            std::copy(lm.begin(), lm.end(), lma.mutable_data());
            return py::make_tuple(to_array(img), lma);
        },
        py::arg("identity_seed"), py::arg("resolution") = 64, py::arg("n_lm") = 20,
        py::arg("yaw") = 0.0f, py::arg("pitch") = 0.0f, py::arg("roll") = 0.0f,
        py::arg("blink_l") = 1.0f, py::arg("blink_r") = 1.0f, py::arg("mouth") = 0.2f,
        "rasterize one synthetic face; returns (image [3,R,R], landmarks [2*n_lm])");

    m.def(
        "gen_audio_feature",
        [](const std::vector<float>& mouth, uint64_t seed) {
            return to_array(synth::gen_audio_feature(mouth, seed));
        },
        py::arg("mouth"), py::arg("seed") = 1234,
        "mouth trajectory -> [T,32] audio feature block (8 signal + 24 noise channels)");

    m.def(
        "grad_check",
        [](const std::string& module, double tol) {
            py::list out;
            for (const auto& r : check::run_suite(module, tol))
                out.append(py::make_tuple(r.name, r.max_rel_err, r.ok));
            return out;
        },
        py::arg("module") = "all", py::arg("tol") = 1e-5,
        "finite-difference verification; returns [(name, max_rel_err, ok), ...]");

    py::class_<Model>(m, "Model")
        .def_static("from_checkpoint", &Model::from_checkpoint, py::arg("path"))
        .def_static("from_config_text", &Model::from_config_text, py::arg("text"))
        .def("forward", &Model::forward, py::arg("audio"), py::arg("pose"), py::arg("eye"),
             py::arg("ref"), "returns (f_geo, image); accepts batched or single inputs")
        .def("reenact", &Model::reenact, py::arg("audio"), py::arg("pose"), py::arg("eye"),
             py::arg("ref"), "returns just the image")
        .def("count_params", &Model::count_params)
        .def("config_text", &Model::config_text)
        .def_property_readonly("resolution", &Model::resolution)
        .def_property_readonly("audio_nodes", &Model::audio_nodes)
        .def_property_readonly("landmarks", &Model::landmarks)
        .def_property_readonly("step_count", &Model::step_count);

    m.attr("AUDIO_CHANNELS") = synth::kAudioChannels;
    m.attr("__version__") = "0.1.0";
}
