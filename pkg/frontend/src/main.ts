import { ApiClient, loadConfig } from "./api.js";
import { mountApp } from "./ui.js";

async function bootstrap(): Promise<void> {
  const root = document.getElementById("root");
  if (!root) {
    throw new Error("missing #root element");
  }
  const config = await loadConfig();
  mountApp(root, new ApiClient(config));
}

void bootstrap();
