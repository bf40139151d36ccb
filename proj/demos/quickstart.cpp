// Phantom -> limited-angle sinogram -> FBP / WLS, then a briefly trained
// network completes the missing views. Usage: demo_quickstart [samples] [epochs]

#include <cstdio>
#include <cstdlib>

#include "lact/lact.hpp"

using namespace lact;

int main(int argc, char** argv) {
  const std::size_t samples = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
  const std::size_t epochs = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 3;

  const auto full = desk_full_geometry();
  const auto test = gen_dataset(1, 42, full, 64, 64)[0];
  const auto limited = restrict_views(test.sinogram, {0, 89});

  const auto fbp_full = fbp_reconstruct(test.sinogram, 64, 64);
  const auto fbp_lim = fbp_reconstruct(limited, 64, 64);
  const auto wls_lim = wls_reconstruct(limited, 64, 64);
  std::printf("full-view FBP     %6.2f dB\n", psnr(fbp_full, test.image));
  std::printf("limited FBP       %6.2f dB\n", psnr(fbp_lim, test.image));
  std::printf("limited WLS       %6.2f dB (%zu iterations)\n", psnr(wls_lim.image, test.image),
              wls_lim.iterations_used);

  CtNet<float> net(CtNetConfig::desk(), 0);
  const auto data = make_train_samples(gen_dataset(samples, 1, full, 64, 64), 90);
  const auto tc = TrainConfig::for_mode(LossMode::mse);
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto m = train_epoch(data, net, tc);
    std::printf("epoch %zu: mean loss %.4f\n", e + 1, m.mean_mse);
  }

  const auto r = reconstruct(limited, net, ReconMethod::wls, full);
  const auto conf = confidence(limited, net, 20, 0.05, 0);
  std::printf("network estimate  %6.2f dB\n", psnr(r.predicted, test.image));
  std::printf("completed + WLS   %6.2f dB, confidence r = %.4f\n", psnr(r.final_image, test.image), conf.score);

  const io::Window w{0.0, 0.05};
  io::export_pgm(test.image, "quickstart_truth.pgm", w);
  io::export_pgm(wls_lim.image, "quickstart_limited_wls.pgm", w);
  io::export_pgm(r.final_image, "quickstart_completed_wls.pgm", w);
  std::printf("wrote quickstart_{truth,limited_wls,completed_wls}.pgm\n");
}
