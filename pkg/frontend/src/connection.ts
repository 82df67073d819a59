/**
 * Websocket transport: one connection per subscribed model.
 *
 * Websocket frames carry the canonical JSON body without the length
 * header (the transport already delimits frames).
 */

import { Mirror, Transport } from "./mirror.js";
import { decodeBody, encodeBody, Message } from "./protocol.js";

export class WsTransport implements Transport {
  private ws: WebSocket;

  constructor(ws: WebSocket) {
    this.ws = ws;
  }

  send(msg: Message): void {
    this.ws.send(encodeBody(msg));
  }
}

export interface ConnectOptions {
  baseUrl?: string; // default: same origin
  user: string;
  modelId: string;
  onError?: (reason: string) => void;
}

export function connect(mirror: Mirror, options: ConnectOptions): WebSocket {
  const base = options.baseUrl ?? defaultBase();
  const url = `${base}/model/${encodeURIComponent(options.modelId)}?user=${encodeURIComponent(options.user)}`;
  const ws = new WebSocket(url);
  ws.onmessage = (event) => {
    const text = String(event.data);
    try {
      mirror.onServerMessage(decodeBody(text));
    } catch (err) {
      // non-protocol payloads are service-level error reports
      try {
        const raw = JSON.parse(text);
        if (raw && typeof raw.error === "string") {
          options.onError?.(raw.error);
          return;
        }
      } catch {
        /* fall through */
      }
      options.onError?.((err as Error).message);
    }
  };
  (mirror as unknown as { transport: Transport }).transport = new WsTransport(ws);
  return ws;
}

function defaultBase(): string {
  const loc = window.location;
  const scheme = loc.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${loc.host}`;
}
