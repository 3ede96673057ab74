/* Copyright 2026 The capadapt Authors.
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

/* Compiled as C to keep the public header C-clean. */
#include <string.h>

#include "capadapt/capadapt.h"

int capi_c_smoke(void) {
  cap_config* cfg = NULL;
  char* value = NULL;
  int ok = 1;
  if (cap_config_new(&cfg) != CAP_OK) return 0;
  if (cap_config_set(cfg, "batch_size", "8") != CAP_OK) ok = 0;
  if (cap_config_get(cfg, "batch_size", &value) != CAP_OK || strcmp(value, "8") != 0) ok = 0;
  cap_free_string(value);
  if (cap_config_set(cfg, "nope", "1") != CAP_ERR_CONFIG) ok = 0;
  cap_config_free(cfg);
  return ok && strlen(cap_version()) > 0;
}
