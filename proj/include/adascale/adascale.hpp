// Copyright 2026 The AdaScale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ADASCALE_ADASCALE_HPP
#define ADASCALE_ADASCALE_HPP

#include "adascale/accountant.hpp"
#include "adascale/baselines.hpp"
#include "adascale/channel.hpp"
#include "adascale/controller.hpp"
#include "adascale/experiment.hpp"
#include "adascale/fl.hpp"
#include "adascale/io.hpp"
#include "adascale/rng.hpp"

#endif  // ADASCALE_ADASCALE_HPP
