#pragma once

// Low-level dense kernels behind the tensor ops.  Everything is row-major
// double precision.  Eigen supplies the GEMM microkernel and vectorized
// exp; tanh/sigmoid are routed through exp because Eigen's double tanh
// falls back to scalar libm.
//
// On machines with more than one core the column-blocked GEMM splits work
// across a small persistent pool.  Each output element is produced by
// exactly one worker running the identical sequential kernel, so results
// are bit-identical to the single-threaded path.

#include <Eigen/Core>

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "physe/common.hpp"

namespace physe::kernels {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXd>;

// ---------------------------------------------------------------------------
// Worker pool (static partition, deterministic)

class Pool {
public:
    static Pool& instance() {
        static Pool pool;
        return pool;
    }

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    /// Runs fn(part) for part in [0, parts) across the pool, blocking until
    /// all parts finish.  Partitioning is static: part indices map to fixed
    /// work, so numerics never depend on scheduling.
    void run(int parts, const std::function<void(int)>& fn) {
        if (parts <= 1 || workers_.empty()) {
            for (int p = 0; p < parts; ++p) fn(p);
            return;
        }
        {
            std::lock_guard<std::mutex> lock(m_);
            job_ = &fn;
            parts_ = parts;
            next_.store(0, std::memory_order_relaxed);
            pending_ = parts;
            ++epoch_;
        }
        cv_.notify_all();
        // The calling thread works too.
        work();
        std::unique_lock<std::mutex> lock(m_);
        done_cv_.wait(lock, [&] { return pending_ == 0; });
        job_ = nullptr;
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lock(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

private:
    Pool() {
        int n = 1;
        if (const char* env = std::getenv("PHYSE_THREADS")) {
            n = std::max(1, std::atoi(env));
        } else {
            n = std::max(1u, std::thread::hardware_concurrency());
        }
        for (int i = 0; i < n - 1; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lock(m_);
                cv_.wait(lock, [&] { return stop_ || epoch_ != seen; });
                if (stop_) return;
                seen = epoch_;
            }
            work();
        }
    }

    void work() {
        for (;;) {
            int p = next_.fetch_add(1, std::memory_order_relaxed);
            if (p >= parts_) break;
            (*job_)(p);
            std::lock_guard<std::mutex> lock(m_);
            if (--pending_ == 0) done_cv_.notify_all();
        }
    }

    std::vector<std::thread> workers_;
    std::mutex m_;
    std::condition_variable cv_, done_cv_;
    const std::function<void(int)>* job_ = nullptr;
    std::atomic<int> next_{0};
    int parts_ = 0;
    int pending_ = 0;
    std::uint64_t epoch_ = 0;
    bool stop_ = false;
};

// ---------------------------------------------------------------------------
// GEMM

/// C[m,n] = alpha * op(A) * op(B) + beta * C, row-major.
inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t k, std::size_t n,
                 double alpha, const double* a, const double* b, double beta, double* c) {
    const auto mi = static_cast<Eigen::Index>(m);
    const auto ki = static_cast<Eigen::Index>(k);
    const auto ni = static_cast<Eigen::Index>(n);
    ConstMatMap A(a, trans_a ? ki : mi, trans_a ? mi : ki);
    ConstMatMap B(b, trans_b ? ni : ki, trans_b ? ki : ni);
    MatMap C(c, mi, ni);

    auto eval = [&](auto&& lhs, auto&& rhs, Eigen::Index col0, Eigen::Index cols) {
        auto block = C.middleCols(col0, cols);
        if (beta == 0.0) {
            block.noalias() = alpha * (lhs * rhs.middleCols(col0, cols));
        } else {
            if (beta != 1.0) block *= beta;
            block.noalias() += alpha * (lhs * rhs.middleCols(col0, cols));
        }
    };
    auto dispatch = [&](auto&& lhs, auto&& rhs) {
        Pool& pool = Pool::instance();
        const double flops = 2.0 * static_cast<double>(m) * static_cast<double>(k) * n;
        int parts = 1;
        if (pool.size() > 1 && flops > 2e5) {
            parts = std::min<int>(pool.size(), static_cast<int>(n / 16));
            parts = std::max(parts, 1);
        }
        if (parts == 1) {
            eval(lhs, rhs, 0, ni);
            return;
        }
        const Eigen::Index chunk = (ni + parts - 1) / parts;
        Pool::instance().run(parts, [&](int p) {
            const Eigen::Index col0 = p * chunk;
            if (col0 >= ni) return;
            eval(lhs, rhs, col0, std::min(chunk, ni - col0));
        });
    };

    if (!trans_a && !trans_b) {
        dispatch(A, B);
    } else if (trans_a && !trans_b) {
        dispatch(A.transpose(), B);
    } else if (!trans_a && trans_b) {
        // Column blocks of B^T are row blocks of B; evaluate unblocked.
        if (beta == 0.0) {
            C.noalias() = alpha * (A * B.transpose());
        } else {
            if (beta != 1.0) C *= beta;
            C.noalias() += alpha * (A * B.transpose());
        }
    } else {
        if (beta == 0.0) {
            C.noalias() = alpha * (A.transpose() * B.transpose());
        } else {
            if (beta != 1.0) C *= beta;
            C.noalias() += alpha * (A.transpose() * B.transpose());
        }
    }
}

// ---------------------------------------------------------------------------
// Vectorized elementwise maps

inline void vexp(const double* x, double* y, std::size_t n) {
    ArrMap(y, n) = ConstArrMap(x, n).exp();
}

inline void vsigmoid(const double* x, double* y, std::size_t n) {
    // 1/(1+e^-x); e^-x saturates to inf for very negative x, giving exact 0.
    ArrMap(y, n) = 1.0 / (1.0 + (-ConstArrMap(x, n)).exp());
}

inline void vtanh(const double* x, double* y, std::size_t n) {
    // tanh through exp keeps the fast vector path for doubles:
    // tanh(x) = sign(x) * (1 - e^(-2|x|)) / (1 + e^(-2|x|)).
    ConstArrMap xs(x, n);
    ArrMap ys(y, n);
    Eigen::ArrayXd t = (-2.0 * xs.abs()).exp();
    ys = xs.sign() * (1.0 - t) / (1.0 + t);
}

inline void vrelu(const double* x, double* y, std::size_t n) {
    ArrMap(y, n) = ConstArrMap(x, n).max(0.0);
}

}  // namespace physe::kernels
