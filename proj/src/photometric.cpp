#include "mvspl/photometric.hpp"

#include <cmath>
#include <stdexcept>

#include "mvspl/image_ops.hpp"
#include "mvspl/parallel.hpp"

namespace mvspl {

IntensityVolume build_intensity_volume(const Image& source,
                                       const Camera& ref_cam,
                                       const Camera& src_cam,
                                       const HypothesisSet& hyp) {
  IntensityVolume vol;
  vol.width = hyp.width;
  vol.height = hyp.height;
  vol.count = hyp.count;
  vol.channels = source.channels;
  vol.data.assign(static_cast<size_t>(hyp.width) * hyp.height * hyp.count *
                      source.channels,
                  0.f);
  vol.valid.assign(static_cast<size_t>(hyp.width) * hyp.height * hyp.count, 0);

  RelativePose rel = relative_pose(ref_cam, src_cam);
  Eigen::Matrix3d Kinv = ref_cam.K.inverse();
  for (int k = 0; k < hyp.count; ++k) {
    if (hyp.uniform) {
      Image warped = homography_warp(source, ref_cam, src_cam,
                                     hyp.uniform_values[k], hyp.width,
                                     hyp.height);
      parallel_for(hyp.height, [&](size_t yy) {
        int y = static_cast<int>(yy);
        for (int x = 0; x < hyp.width; ++x) {
          if (!warped.valid(x, y)) continue;
          size_t cell = (static_cast<size_t>(y) * hyp.width + x) * hyp.count + k;
          for (int c = 0; c < vol.channels; ++c)
            vol.data[cell * vol.channels + c] = warped.at(x, y, c);
          vol.valid[cell] = 1;
        }
      });
    } else {
      parallel_for(hyp.height, [&](size_t yy) {
        int y = static_cast<int>(yy);
        for (int x = 0; x < hyp.width; ++x) {
          if (!hyp.valid(x, y)) continue;
          double d = hyp.at(x, y, k);
          if (!(d > 0.0)) continue;
          Eigen::Vector3d X = d * (Kinv * Eigen::Vector3d(x, y, 1.0));
          Eigen::Vector3d Xs = rel.R * X + rel.T;
          if (!(Xs.z() > 0.0)) continue;
          Eigen::Vector3d h = src_cam.K * Xs;
          double sx = h.x() / h.z();
          double sy = h.y() / h.z();
          size_t cell = (static_cast<size_t>(y) * hyp.width + x) * hyp.count + k;
          bool ok = true;
          for (int c = 0; c < vol.channels; ++c) {
            auto v = bilinear_sample(source, sx, sy, c);
            if (!v) {
              ok = false;
              break;
            }
            vol.data[cell * vol.channels + c] = *v;
          }
          if (ok) vol.valid[cell] = 1;
        }
      });
    }
  }
  return vol;
}

Image synthesize_image(const IntensityVolume& B, const ProbabilityVolume& P) {
  if (B.width != P.width || B.height != P.height || B.count != P.count)
    throw std::invalid_argument("synthesize_image: hypothesis axis mismatch");
  Image out(B.width, B.height, B.channels);
  out.mask.assign(out.pixel_count(), 0);
  parallel_for(B.height, [&](size_t yy) {
    int y = static_cast<int>(yy);
    for (int x = 0; x < B.width; ++x) {
      if (!P.valid(x, y)) continue;
      double mass = 0.0;
      for (int k = 0; k < B.count; ++k)
        if (B.cell_valid(x, y, k)) mass += P.at(x, y, k);
      if (mass < 0.5) continue;
      for (int c = 0; c < B.channels; ++c) {
        double acc = 0.0;
        for (int k = 0; k < B.count; ++k)
          if (B.cell_valid(x, y, k)) acc += B.at(x, y, k, c) * P.at(x, y, k);
        out.at(x, y, c) = static_cast<float>(acc / mass);
      }
      out.set_valid(x, y, true);
    }
  });
  return out;
}

double loss_gradient(const std::vector<Image>& synthesized,
                     const Image& reference) {
  if (synthesized.empty())
    throw std::invalid_argument("loss_gradient: empty view set");
  Gradients ref_g = forward_gradients(reference);
  double total = 0.0;
  size_t total_n = 0;
  for (const Image& syn : synthesized) {
    if (!syn.same_shape(reference))
      throw std::invalid_argument("loss_gradient: shape mismatch");
    Gradients g = forward_gradients(syn);
    double acc = 0.0;
    size_t n = 0;
    for (int y = 0; y < syn.height; ++y)
      for (int x = 0; x < syn.width; ++x) {
        size_t i = static_cast<size_t>(y) * syn.width + x;
        double pix = 0.0;
        bool any = false;
        if (g.du_valid[i] && ref_g.du_valid[i]) {
          double s = 0.0;
          for (int c = 0; c < syn.channels; ++c)
            s += std::abs(g.du.at(x, y, c) - ref_g.du.at(x, y, c));
          pix += s / syn.channels;
          any = true;
        }
        if (g.dv_valid[i] && ref_g.dv_valid[i]) {
          double s = 0.0;
          for (int c = 0; c < syn.channels; ++c)
            s += std::abs(g.dv.at(x, y, c) - ref_g.dv.at(x, y, c));
          pix += s / syn.channels;
          any = true;
        }
        if (any) {
          acc += pix;
          ++n;
        }
      }
    if (n == 0) throw std::invalid_argument("loss_gradient: no valid pixels");
    total += acc / n;
    total_n += n;
  }
  (void)total_n;
  return total / synthesized.size();
}

Image ssim_index(const Image& a, const Image& b, int window) {
  if (!a.same_shape(b))
    throw std::invalid_argument("ssim_index: images differ in shape");
  if (window > a.width || window > a.height)
    throw std::invalid_argument("ssim_index: window larger than image");
  const double C1 = 0.01 * 0.01;
  const double C2 = 0.03 * 0.03;
  const int r = window / 2;
  Image out(a.width, a.height, 1);
  out.mask.assign(out.pixel_count(), 0);
  parallel_for(a.height, [&](size_t yy) {
    int y = static_cast<int>(yy);
    for (int x = 0; x < a.width; ++x) {
      if (x - r < 0 || y - r < 0 || x + r >= a.width || y + r >= a.height)
        continue;
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      bool ok = true;
      for (int dy = -r; dy <= r && ok; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          int px = x + dx, py = y + dy;
          if (!a.valid(px, py) || !b.valid(px, py)) {
            ok = false;
            break;
          }
          for (int c = 0; c < a.channels; ++c) {
            double va = a.at(px, py, c);
            double vb = b.at(px, py, c);
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
          }
        }
      if (!ok) continue;
      double n = static_cast<double>(window) * window * a.channels;
      double mu_a = sa / n, mu_b = sb / n;
      double var_a = saa / n - mu_a * mu_a;
      double var_b = sbb / n - mu_b * mu_b;
      double cov = sab / n - mu_a * mu_b;
      double ssim = ((2 * mu_a * mu_b + C1) * (2 * cov + C2)) /
                    ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
      out.at(x, y) = static_cast<float>(ssim);
      out.set_valid(x, y, true);
    }
  });
  return out;
}

double loss_ssim(const std::vector<Image>& synthesized, const Image& reference,
                 int window) {
  if (synthesized.empty())
    throw std::invalid_argument("loss_ssim: empty view set");
  double total = 0.0;
  for (const Image& syn : synthesized) {
    Image map = ssim_index(syn, reference, window);
    double acc = 0.0;
    size_t n = 0;
    for (int y = 0; y < map.height; ++y)
      for (int x = 0; x < map.width; ++x)
        if (map.valid(x, y)) {
          acc += map.at(x, y);
          ++n;
        }
    if (n == 0) throw std::invalid_argument("loss_ssim: no valid windows");
    total += 1.0 - acc / n;
  }
  return total / synthesized.size();
}

FeatureExtractor default_feature_extractor() {
  return [](const Image& img) {
    std::vector<Image> features;
    Image current = to_grayscale(img);
    for (int scale = 0; scale < 3; ++scale) {
      Gradients g = forward_gradients(current);
      Image mag(current.width, current.height, 1);
      for (int y = 0; y < current.height; ++y)
        for (int x = 0; x < current.width; ++x) {
          size_t i = static_cast<size_t>(y) * current.width + x;
          double du = g.du_valid[i] ? g.du.at(x, y) : 0.0;
          double dv = g.dv_valid[i] ? g.dv.at(x, y) : 0.0;
          mag.at(x, y) = static_cast<float>(std::hypot(du, dv));
        }
      features.push_back(std::move(mag));
      if (scale < 2 && current.width >= 4 && current.height >= 4 &&
          current.width % 2 == 0 && current.height % 2 == 0)
        current = downsample(gaussian_blur(current), 2);
      else if (scale < 2)
        break;
    }
    return features;
  };
}

double loss_perceptual(const std::vector<Image>& synthesized,
                       const Image& reference,
                       const FeatureExtractor& extractor) {
  if (synthesized.empty())
    throw std::invalid_argument("loss_perceptual: empty view set");
  std::vector<Image> ref_features = extractor(reference);
  double total = 0.0;
  for (const Image& syn : synthesized) {
    if (!syn.same_shape(reference))
      throw std::invalid_argument("loss_perceptual: shape mismatch");
    // Composite invalid pixels over the reference so unobserved regions do
    // not register as feature differences.
    Image composed = reference;
    for (int y = 0; y < syn.height; ++y)
      for (int x = 0; x < syn.width; ++x)
        if (syn.valid(x, y))
          for (int c = 0; c < syn.channels; ++c)
            composed.at(x, y, c) = syn.at(x, y, c);
    std::vector<Image> fs = extractor(composed);
    if (fs.size() != ref_features.size())
      throw std::invalid_argument("loss_perceptual: extractor layer mismatch");
    double view_total = 0.0;
    for (size_t j = 0; j < fs.size(); ++j) {
      if (!fs[j].same_shape(ref_features[j]))
        throw std::invalid_argument(
            "loss_perceptual: extractor output shape mismatch");
      double acc = 0.0;
      for (size_t i = 0; i < fs[j].data.size(); ++i)
        acc += std::abs(fs[j].data[i] - ref_features[j].data[i]);
      view_total += acc / fs[j].data.size();
    }
    total += view_total;
  }
  return total / synthesized.size();
}

double loss_smoothness(const DepthMap& depth, const Image& reference) {
  if (depth.width != reference.width || depth.height != reference.height)
    throw std::invalid_argument("loss_smoothness: shape mismatch");
  double inv_sum = 0.0;
  size_t n = 0;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x)
      if (depth.is_valid(x, y)) {
        if (!(depth.at(x, y) > 0.f))
          throw std::invalid_argument("loss_smoothness: depths must be positive");
        inv_sum += 1.0 / depth.at(x, y);
        ++n;
      }
  if (n == 0)
    throw std::invalid_argument("loss_smoothness: all-invalid depth map");
  double mean_inv = inv_sum / n;
  Image gray = to_grayscale(reference);
  auto normalized = [&](int x, int y) {
    return (1.0 / depth.at(x, y)) / mean_inv;
  };
  double loss = 0.0;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(x, y)) continue;
      if (x + 1 < depth.width && depth.is_valid(x + 1, y)) {
        double dd = std::abs(normalized(x + 1, y) - normalized(x, y));
        double di = std::abs(gray.at(x + 1, y) - gray.at(x, y));
        loss += dd * std::exp(-di);
      }
      if (y + 1 < depth.height && depth.is_valid(x, y + 1)) {
        double dd = std::abs(normalized(x, y + 1) - normalized(x, y));
        double di = std::abs(gray.at(x, y + 1) - gray.at(x, y));
        loss += dd * std::exp(-di);
      }
    }
  return loss;
}

LossBreakdown loss_synthesis(double l_g, double l_ssim_v, double l_p,
                             double l_s, const LossWeights& w,
                             size_t valid_pixels) {
  if (w.gradient < 0 || w.ssim < 0 || w.perceptual < 0 || w.smoothness < 0)
    throw std::invalid_argument("loss_synthesis: negative weights rejected");
  LossBreakdown b;
  b.l_gradient = l_g;
  b.l_ssim = l_ssim_v;
  b.l_perceptual = l_p;
  b.l_smoothness = l_s;
  b.l_synthesis = w.gradient * l_g + w.ssim * l_ssim_v + w.perceptual * l_p +
                  w.smoothness * l_s;
  b.valid_pixels = valid_pixels;
  return b;
}

AgreementScore pseudo_agreement(const std::vector<DepthMap>& estimated,
                                const std::vector<DepthMap>& pseudo) {
  if (estimated.size() != pseudo.size())
    throw std::invalid_argument("pseudo_agreement: level count mismatch");
  AgreementScore score;
  for (size_t l = 0; l < estimated.size(); ++l) {
    const DepthMap& est = estimated[l];
    const DepthMap& ps = pseudo[l];
    if (est.width != ps.width || est.height != ps.height)
      throw std::invalid_argument("pseudo_agreement: resolution mismatch at level " +
                                  std::to_string(l));
    for (int y = 0; y < est.height; ++y)
      for (int x = 0; x < est.width; ++x)
        if (ps.is_valid(x, y) && est.is_valid(x, y)) {
          score.sum += std::abs(static_cast<double>(ps.at(x, y)) - est.at(x, y));
          ++score.valid_pixels;
        }
  }
  if (score.valid_pixels == 0)
    throw std::invalid_argument("pseudo_agreement: no jointly valid pixels");
  score.mean = score.sum / score.valid_pixels;
  return score;
}

}  // namespace mvspl
