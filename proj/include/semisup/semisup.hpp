/*
 * Copyright 2026 The semisup Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SEMISUP_SEMISUP_HPP
#define SEMISUP_SEMISUP_HPP

#include "semisup/classifier.hpp"
#include "semisup/config.hpp"
#include "semisup/dataset.hpp"
#include "semisup/dedup.hpp"
#include "semisup/error.hpp"
#include "semisup/feature_file.hpp"
#include "semisup/manifest.hpp"
#include "semisup/pipeline.hpp"
#include "semisup/rng.hpp"
#include "semisup/schedule.hpp"
#include "semisup/selector.hpp"
#include "semisup/syngen.hpp"
#include "semisup/trainer.hpp"

#endif  // SEMISUP_SEMISUP_HPP
