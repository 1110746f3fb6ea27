// Copyright 2026 The irec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "irec/aux_chain.hpp"
#include "irec/bitstream.hpp"
#include "irec/detmath.hpp"
#include "irec/errors.hpp"
#include "irec/gauss.hpp"
#include "irec/harness.hpp"
#include "irec/pipeline.hpp"
#include "irec/rec_codec.hpp"
#include "irec/residual_coder.hpp"
#include "irec/sample_stream.hpp"
#include "irec/toy_model.hpp"
