// SPDX-License-Identifier: Apache-2.0
//
// cfura - joint message detection and channel estimation for cell-free uRA
// Copyright (C) 2026 cfura contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CFURA_PARALLEL_HPP
#define CFURA_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cfura
{
    // Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
    // processed exactly once; callers write results into slot i so the
    // outcome does not depend on scheduling. The first exception is rethrown.
    template <class Fn>
    void parallel_for(int n, int threads, Fn &&fn)
    {
        if (n <= 0)
            return;
        threads = std::clamp(threads, 1, n);
        if (threads == 1)
        {
            for (int i = 0; i < n; ++i)
                fn(i);
            return;
        }

        std::atomic<int> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        auto worker = [&]()
        {
            for (;;)
            {
                const int i = next.fetch_add(1);
                if (i >= n)
                    return;
                try
                {
                    fn(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                    next.store(n);
                }
            }
        };

        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int k = 0; k < threads; ++k)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
        if (error)
            std::rethrow_exception(error);
    }
}

#endif
