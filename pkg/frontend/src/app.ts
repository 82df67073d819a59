/**
 * Minimal canvas application: fetch the metamodel, open the websocket,
 * re-render the SVG on every replica change, create nodes on palette
 * clicks and move them by dragging.
 */

import { connect } from "./connection.js";
import { Mirror } from "./mirror.js";
import { toSvg, viewModel } from "./render.js";

interface AppOptions {
  root: HTMLElement;
  modelId: string;
  user: string;
}

export async function startApp(options: AppOptions): Promise<Mirror> {
  const meta = (await (await fetch("/meta")).json()) as Record<string, unknown>;
  const mirror = new Mirror(meta, options.user);

  const palette = document.createElement("div");
  palette.className = "palette";
  const canvasHost = document.createElement("div");
  canvasHost.className = "canvas";
  options.root.append(palette, canvasHost);

  const nodeTypes = ([
    ...((meta["nodes"] ?? []) as { name: string; abstract?: boolean }[]),
    ...((meta["containers"] ?? []) as { name: string; abstract?: boolean }[]),
  ]).filter((t) => !t.abstract);

  let placing: string | null = null;
  for (const t of nodeTypes) {
    const button = document.createElement("button");
    button.textContent = t.name;
    button.onclick = () => {
      placing = t.name;
    };
    palette.appendChild(button);
  }

  let counter = 0;
  canvasHost.addEventListener("click", (event) => {
    if (!placing || !mirror.replica) return;
    counter += 1;
    const rect = canvasHost.getBoundingClientRect();
    mirror.localEdit([
      {
        type: "CreateNode",
        id: `${options.user}-${Date.now().toString(36)}-${counter}`,
        typeName: placing,
        containerId: mirror.replica.id,
        x: Math.round(event.clientX - rect.left),
        y: Math.round(event.clientY - rect.top),
        width: 80,
        height: 40,
        initialAttributes: {},
      },
    ]);
    placing = null;
  });

  mirror.onChange = () => {
    if (mirror.replica) {
      canvasHost.innerHTML = toSvg(viewModel(mirror.replica, meta));
    }
  };

  connect(mirror, {
    user: options.user,
    modelId: options.modelId,
    onError: (reason) => console.warn("server refused:", reason),
  });
  return mirror;
}
