#include "lvgpt/vision.hpp"

#include "lvgpt/error.hpp"
#include "lvgpt/ops.hpp"

namespace lvgpt {

std::string_view to_string(VisionBackend b) {
    return b == VisionBackend::cnn_lite ? "cnn_lite" : "vit_lite";
}

VisionBackend parse_vision_backend(std::string_view s) {
    if (s == "cnn_lite") return VisionBackend::cnn_lite;
    if (s == "vit_lite") return VisionBackend::vit_lite;
    throw ConfigError("unknown vision backend '" + std::string(s) + "' (expected cnn_lite or vit_lite)");
}

void VisionTokenizerConfig::validate() const {
    if (patch_grid == 0 || image_size == 0 || image_size % patch_grid != 0) {
        throw ConfigError("vision: image_size " + std::to_string(image_size) + " is not divisible by patch_grid " +
                          std::to_string(patch_grid));
    }
    if (token_dim == 0) throw ConfigError("vision: token_dim must be >= 1");
    if (backend == VisionBackend::cnn_lite && (image_size % 2 != 0 || (image_size / 2) % patch_grid != 0)) {
        throw ConfigError("vision: cnn_lite needs image_size/2 divisible by patch_grid");
    }
}

template <typename T>
VisionParams<T> init_vision_params(const VisionTokenizerConfig& cfg, ParamInit<T>& init) {
    cfg.validate();
    if (cfg.backend == VisionBackend::cnn_lite) {
        const std::size_t s = (cfg.image_size / 2) / cfg.patch_grid;
        CnnLiteParams<T> p;
        p.stem_w = init.normal({kCnnLiteWidth, 3, 3, 3});
        p.stem_b = init.zeros({kCnnLiteWidth});
        p.res1_w = init.normal({kCnnLiteWidth, kCnnLiteWidth, 3, 3});
        p.res1_b = init.zeros({kCnnLiteWidth});
        p.res2_w = init.normal({kCnnLiteWidth, kCnnLiteWidth, 3, 3});
        p.res2_b = init.zeros({kCnnLiteWidth});
        p.head_w = init.normal({cfg.token_dim, kCnnLiteWidth, s, s});
        p.head_b = init.zeros({cfg.token_dim});
        return p;
    }
    const std::size_t patch_dim = 3 * cfg.patch_size() * cfg.patch_size();
    VitLiteParams<T> p;
    p.proj_w = init.normal({patch_dim, cfg.token_dim});
    p.proj_b = init.zeros({cfg.token_dim});
    if (cfg.vit_internal_pose) p.pose = init.normal({cfg.num_tokens(), cfg.token_dim});
    return p;
}

template <typename T>
void collect_parameters(const VisionParams<T>& params, NamedParams<T>& out) {
    if (const auto* c = std::get_if<CnnLiteParams<T>>(&params)) {
        out.emplace_back("vision.stem.weight", c->stem_w);
        out.emplace_back("vision.stem.bias", c->stem_b);
        out.emplace_back("vision.res1.weight", c->res1_w);
        out.emplace_back("vision.res1.bias", c->res1_b);
        out.emplace_back("vision.res2.weight", c->res2_w);
        out.emplace_back("vision.res2.bias", c->res2_b);
        out.emplace_back("vision.head.weight", c->head_w);
        out.emplace_back("vision.head.bias", c->head_b);
        return;
    }
    const auto& v = std::get<VitLiteParams<T>>(params);
    out.emplace_back("vision.proj.weight", v.proj_w);
    out.emplace_back("vision.proj.bias", v.proj_b);
    if (v.pose) out.emplace_back("vision.pose", *v.pose);
}

template <typename T>
Tensor<T> extract_patches(const Tensor<T>& image, std::size_t grid) {
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != image.dim(2) || grid == 0 ||
        image.dim(1) % grid != 0) {
        throw ShapeError("extract_patches: cannot split image " + to_string(image.shape()) + " into a " +
                         std::to_string(grid) + "x" + std::to_string(grid) + " grid");
    }
    const std::size_t size = image.dim(1), p = size / grid;
    const std::size_t patch_dim = 3 * p * p;
    std::vector<T> out(grid * grid * patch_dim);
    for (std::size_t gy = 0; gy < grid; ++gy)
        for (std::size_t gx = 0; gx < grid; ++gx) {
            T* dst = out.data() + (gy * grid + gx) * patch_dim;
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < p; ++y)
                    for (std::size_t x = 0; x < p; ++x)
                        *dst++ = image[(c * size + gy * p + y) * size + gx * p + x];
        }
    return Tensor<T>::from_data({grid * grid, patch_dim}, std::move(out));
}

template <typename T>
VisionTokens<T> tokenize_image(const Tensor<T>& image, const VisionTokenizerConfig& cfg,
                               const VisionParams<T>& params) {
    const Shape expected{3, cfg.image_size, cfg.image_size};
    if (image.shape() != expected) {
        throw ValueError("tokenize_image: expected image " + to_string(expected) + ", got " +
                         to_string(image.shape()));
    }
    const std::size_t g = cfg.patch_grid;
    if (cfg.backend == VisionBackend::cnn_lite) {
        const auto& p = std::get<CnnLiteParams<T>>(params);
        const std::size_t s = (cfg.image_size / 2) / g;
        auto h1 = gelu(conv2d(image, p.stem_w, p.stem_b, 2, 1));
        auto r = conv2d(gelu(conv2d(h1, p.res1_w, p.res1_b, 1, 1)), p.res2_w, p.res2_b, 1, 1);
        auto h2 = gelu(add(h1, r));
        auto h3 = gelu(conv2d(h2, p.head_w, p.head_b, s, 0));  // [token_dim, g, g]
        return {transpose(reshape(h3, {cfg.token_dim, g * g})), g};
    }
    const auto& p = std::get<VitLiteParams<T>>(params);
    auto tokens = add_bias(matmul(extract_patches(image, g), p.proj_w), p.proj_b);
    if (cfg.vit_internal_pose) {
        if (!p.pose) throw ConfigError("tokenize_image: vit_lite internal pose enabled but no pose table");
        tokens = add(tokens, *p.pose);
    }
    return {tokens, g};
}

#define LVGPT_INSTANTIATE_VISION(T)                                                                       \
    template VisionParams<T> init_vision_params<T>(const VisionTokenizerConfig&, ParamInit<T>&);           \
    template void collect_parameters<T>(const VisionParams<T>&, NamedParams<T>&);                          \
    template Tensor<T> extract_patches<T>(const Tensor<T>&, std::size_t);                                  \
    template VisionTokens<T> tokenize_image<T>(const Tensor<T>&, const VisionTokenizerConfig&,             \
                                               const VisionParams<T>&);

LVGPT_INSTANTIATE_VISION(float)
LVGPT_INSTANTIATE_VISION(double)

}  // namespace lvgpt
