// Serial vs OpenMP Schur assembly, plus the dense reference on small sizes
// and one end-to-end flight certification.
#include "iqccert/benchmarks.hpp"
#include "iqccert/certifier.hpp"
#include "iqccert/schur_kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace iqccert;

namespace {

struct Fixture {
  int n, dim;
  Matrix H, G, X, Zi;
  std::vector<sdp::SparseSym> vars;
  sdp::StructuredBlock block;
  int m;

  Fixture(int n_, int extra, int n_sparse) : n(n_), dim(n_ + extra) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    auto rnd = [&](int r, int c) {
      Matrix a(r, c);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) a(i, j) = g(rng);
      return a;
    };
    H = Matrix::Zero(n, dim);
    H.leftCols(n).setIdentity();
    G = rnd(n, dim);
    const Matrix a = rnd(dim, dim), b = rnd(dim, dim);
    X = a * a.transpose() + dim * Matrix::Identity(dim, dim);
    Zi = b * b.transpose() + dim * Matrix::Identity(dim, dim);
    vars.resize(static_cast<size_t>(n_sparse));
    std::uniform_int_distribution<int> pick(0, dim - 1);
    for (auto& v : vars)
      for (int t = 0; t < 3; ++t) sdp::add_sym(v, pick(rng), pick(rng), g(rng));
    block.dim = dim;
    block.H = &H;
    block.G = &G;
    const int np = n * (n + 1) / 2;
    for (int k = 0; k < n_sparse; ++k) block.sparse.push_back({np + k, &vars[static_cast<size_t>(k)]});
    m = np + n_sparse;
  }
};

void BM_SchurSerial(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)), static_cast<int>(st.range(0)));
  Matrix M(f.m, f.m);
  for (auto _ : st) {
    M.setZero();
    sdp::schur_serial(f.block, f.n, f.X, f.Zi, M);
    benchmark::DoNotOptimize(M.data());
  }
}

void BM_SchurParallel(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)), static_cast<int>(st.range(0)));
  Matrix M(f.m, f.m);
  for (auto _ : st) {
    M.setZero();
    sdp::schur_parallel(f.block, f.n, f.X, f.Zi, M);
    benchmark::DoNotOptimize(M.data());
  }
}

void BM_SchurDenseReference(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)), static_cast<int>(st.range(0)));
  Matrix M(f.m, f.m);
  for (auto _ : st) {
    M.setZero();
    sdp::schur_dense_reference(f.block, f.n, f.X, f.Zi, M);
    benchmark::DoNotOptimize(M.data());
  }
}

void BM_FlightCertify(benchmark::State& st) {
  const Benchmark bm = preset("flight4");
  const CertSetup setup = bm.cert_setup(true);
  const auto asmb = setup.assembler(bm.bounds_factory().make(ConstraintMode::Sparsity, 1.0));
  const CertProblem p = asmb(100.0);
  sdp::Options opt;
  opt.parallel = st.range(0) != 0;
  for (auto _ : st) benchmark::DoNotOptimize(feasibility(p, opt).feasible);
}

}  // namespace

BENCHMARK(BM_SchurSerial)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SchurParallel)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SchurDenseReference)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FlightCertify)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
