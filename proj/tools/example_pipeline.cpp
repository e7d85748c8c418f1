// End-to-end walk through the library on a small synthetic corpus:
// annotator -> weak labels -> detector trained on labeled + weak data.

#include <iostream>

#include "wefend/wefend.hpp"

int main() {
  using namespace wefend;

  ExperimentConfig cfg;
  SynthConfig sc;
  sc.n_train_fake = sc.n_train_real = 200;
  sc.n_test_fake = sc.n_test_real = 100;
  sc.n_unlabeled = 1000;
  cfg.corpus.synthetic = sc;
  cfg.extractor.embedding_dim = 16;
  cfg.encoding = {12, 8};
  cfg.learning_rate = 1e-3;
  cfg.annotator_epochs = 5;
  cfg.detector_epochs = 5;

  const std::uint64_t seed = 7;
  const SeedContext ctx = prepare_seed(cfg, seed, true);
  std::cout << "vocabulary " << ctx.vocab.size() << " tokens, " << ctx.weak_train.size() << " weak samples, "
            << "weak label accuracy " << label_accuracy(ctx.weak_train, ctx.weak_train_truth) << '\n';

  for (auto mode : {TrainingMode::supervised, TrainingMode::wefend_minus}) {
    const RunResult r = run_mode(cfg, ctx, mode, seed);
    std::cout << mode_name(mode) << ": test accuracy " << r.test.accuracy << " (best epoch " << r.best_epoch << ")\n";
  }
}
