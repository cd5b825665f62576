#include "dpcn/gradcam.hpp"

#include <algorithm>
#include <cmath>

namespace dpcn {

Heatmap grad_cam(const ModelState& model, const LabeledImage& img, int target_class) {
    if (target_class < 0 || target_class >= model.arch.num_classes)
        throw DpcnError("grad_cam: target class out of range");
    if (!model.arch.has_head()) throw DpcnError("grad_cam: model has no head");

    ForwardCache cache;
    Tensor batch(1, img.pixels.h, img.pixels.w, img.pixels.c);
    batch.v = img.pixels.v;
    model_forward(model, batch, Mode::eval, nullptr, &cache);

    // d(logit_target)/d(last conv activation), head layers only
    Tensor dlogits(1, 1, 1, model.arch.num_classes);
    dlogits.at(0, 0, 0, target_class) = 1.0;
    Tensor dpre;
    model_backward(model, cache, dlogits, nullptr, &dpre, /*head_only=*/true);

    const Tensor& act = cache.pre_head;
    std::vector<double> weights(act.c, 0.0);
    const double scale = 1.0 / (static_cast<double>(act.h) * act.w);
    for (int y = 0; y < act.h; ++y)
        for (int x = 0; x < act.w; ++x)
            for (int c = 0; c < act.c; ++c) weights[c] += dpre.at(0, y, x, c) * scale;

    Tensor map = Tensor::image(act.h, act.w, 1);
    for (int y = 0; y < act.h; ++y) {
        for (int x = 0; x < act.w; ++x) {
            double s = 0.0;
            for (int c = 0; c < act.c; ++c) s += weights[c] * act.at(0, y, x, c);
            map.at(0, y, x, 0) = std::max(0.0, s);
        }
    }

    Heatmap heat;
    heat.values = resize_bilinear(map, img.pixels.h, img.pixels.w);
    double mx = 0.0;
    for (double v : heat.values.v) mx = std::max(mx, v);
    if (mx > 0.0)
        for (double& v : heat.values.v) v /= mx;
    return heat;
}

Tensor heatmap_overlay(const Tensor& img, const Heatmap& heat) {
    Tensor out = Tensor::image(img.h, img.w, 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            const double base = (img.c == 3)
                                    ? 0.299 * img.at(0, y, x, 0) + 0.587 * img.at(0, y, x, 1) +
                                          0.114 * img.at(0, y, x, 2)
                                    : img.at(0, y, x, 0);
            const double h = heat.values.at(0, y, x, 0);
            out.at(0, y, x, 0) = std::clamp(0.5 * base + 0.5 * h, 0.0, 1.0);
            out.at(0, y, x, 1) = std::clamp(0.5 * base + 0.15 * h, 0.0, 1.0);
            out.at(0, y, x, 2) = std::clamp(0.5 * base, 0.0, 1.0);
        }
    }
    return out;
}

} // namespace dpcn
