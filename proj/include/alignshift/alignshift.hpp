// Copyright (c) 2026 The AlignShift Authors. All Rights Reserved.
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

#pragma once

#include "alignshift/bench.hpp"
#include "alignshift/convert.hpp"
#include "alignshift/error.hpp"
#include "alignshift/froc.hpp"
#include "alignshift/network.hpp"
#include "alignshift/network_io.hpp"
#include "alignshift/nn.hpp"
#include "alignshift/phantom.hpp"
#include "alignshift/resample.hpp"
#include "alignshift/shift.hpp"
#include "alignshift/tensor.hpp"
#include "alignshift/volume_io.hpp"
