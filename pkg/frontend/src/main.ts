/**
 * Entry point: boot the gallery against a running evolution service.
 *
 * Query parameters:
 *   ?api=http://127.0.0.1:8000   service base URL
 *   &session=<id>                attach to an existing session
 *   &dataset=/abs/path           or create one over a dataset directory
 *   &labels=sitting,rolling      initial constraint labels
 */

import { ApiClient } from "./api.js";
import { renderGallery } from "./render.js";
import { GalleryViewModel } from "./viewmodel.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(params.get("api") ?? "http://127.0.0.1:8000");
  const vm = new GalleryViewModel(api);

  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  vm.onChange(() => renderGallery(root, vm));

  const sessionId = params.get("session");
  const dataset = params.get("dataset");
  try {
    if (sessionId) {
      await vm.attach(sessionId);
    } else if (dataset) {
      const labels = (params.get("labels") ?? "").split(",").filter(Boolean);
      await vm.createSession(dataset, labels);
    } else {
      root.textContent = "Pass ?session=<id> or ?dataset=<dir> to begin.";
      return;
    }
  } catch (err) {
    root.textContent = `Failed to start: ${err instanceof Error ? err.message : err}`;
  }
}

void boot();
