/**
 * Wire protocol codec, byte-compatible with the server.
 *
 * A frame is `<byteLength>\n<canonical JSON>`; websocket transports carry
 * only the JSON body (the frame length is redundant there). Canonical JSON
 * means: keys sorted at every level, no whitespace, non-ASCII escaped as
 * \uXXXX. Encoding the result of a decode always reproduces the input
 * byte for byte, which is what the shared golden vectors assert.
 */

export const PROTOCOL_VERSION = 1;

export class DecodeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "DecodeError";
  }
}

export type AttributeValues = Record<string, unknown[]>;
export type Point = [number, number];

export interface CommandBase {
  type: string;
  version?: number;
}

export interface CreateNode extends CommandBase {
  type: "CreateNode";
  id: string;
  typeName: string;
  containerId: string;
  x: number;
  y: number;
  width: number;
  height: number;
  initialAttributes: AttributeValues;
}

export interface DeleteNode extends CommandBase {
  type: "DeleteNode";
  id: string;
  oldState: Record<string, unknown>;
}

export interface MoveNode extends CommandBase {
  type: "MoveNode";
  id: string;
  fromContainerId: string;
  toContainerId: string;
  from: Point;
  to: Point;
}

export interface ResizeNode extends CommandBase {
  type: "ResizeNode";
  id: string;
  oldSize: Point;
  newSize: Point;
}

export interface CreateEdge extends CommandBase {
  type: "CreateEdge";
  id: string;
  typeName: string;
  sourceId: string;
  targetId: string;
  bendPoints: Point[];
  initialAttributes: AttributeValues;
}

export interface DeleteEdge extends CommandBase {
  type: "DeleteEdge";
  id: string;
  oldState: Record<string, unknown>;
}

export interface ReconnectEdge extends CommandBase {
  type: "ReconnectEdge";
  id: string;
  oldSource: string;
  oldTarget: string;
  newSource: string;
  newTarget: string;
}

export interface BendEdge extends CommandBase {
  type: "BendEdge";
  id: string;
  oldBendPoints: Point[];
  newBendPoints: Point[];
}

export interface SetAttributes extends CommandBase {
  type: "SetAttributes";
  id: string;
  oldAssignment: AttributeValues;
  newAssignment: AttributeValues;
}

export interface Routing extends CommandBase {
  type: "Routing";
  editorPreference: { algorithm: string; connectorKind: string };
}

export interface Click extends CommandBase {
  type: "Click";
  id: string;
}

export interface DoubleClick extends CommandBase {
  type: "DoubleClick";
  id: string;
}

export interface ContextMenu extends CommandBase {
  type: "ContextMenu";
  id: string;
  actionId: string;
}

export interface RestoreElement extends CommandBase {
  type: "RestoreElement";
  id: string;
  /** Authoritative element state, or null when the element is absent centrally. */
  state: Record<string, unknown> | null;
}

export type Command =
  | CreateNode
  | DeleteNode
  | MoveNode
  | ResizeNode
  | CreateEdge
  | DeleteEdge
  | ReconnectEdge
  | BendEdge
  | SetAttributes
  | Routing
  | Click
  | DoubleClick
  | ContextMenu
  | RestoreElement;

export type MessageKind = "edit" | "revert" | "init" | "initRequest" | "interaction";

export interface Message {
  protocol?: number;
  messageId: string;
  graphModelId: string;
  userId?: string;
  kind: MessageKind;
  commands?: Command[];
  snapshot?: Record<string, unknown>;
  modelVersion?: number;
}

const MESSAGE_KINDS: ReadonlySet<string> = new Set([
  "edit",
  "revert",
  "init",
  "initRequest",
  "interaction",
]);

interface FieldSpec {
  required: string[];
  optional: string[];
}

/** Exact field whitelist per command type; anything else is rejected. */
const COMMAND_FIELDS: Record<string, FieldSpec> = {
  CreateNode: {
    required: ["id", "typeName", "containerId", "x", "y", "width", "height",
      "initialAttributes"],
    optional: ["version"],
  },
  DeleteNode: { required: ["id", "oldState"], optional: ["version"] },
  MoveNode: {
    required: ["id", "fromContainerId", "toContainerId", "from", "to"],
    optional: ["version"],
  },
  ResizeNode: { required: ["id", "oldSize", "newSize"], optional: ["version"] },
  CreateEdge: {
    required: ["id", "typeName", "sourceId", "targetId", "bendPoints",
      "initialAttributes"],
    optional: ["version"],
  },
  DeleteEdge: { required: ["id", "oldState"], optional: ["version"] },
  ReconnectEdge: {
    required: ["id", "oldSource", "oldTarget", "newSource", "newTarget"],
    optional: ["version"],
  },
  BendEdge: {
    required: ["id", "oldBendPoints", "newBendPoints"],
    optional: ["version"],
  },
  SetAttributes: {
    required: ["id", "oldAssignment", "newAssignment"],
    optional: ["version"],
  },
  Routing: { required: ["editorPreference"], optional: ["version"] },
  Click: { required: ["id"], optional: ["version"] },
  DoubleClick: { required: ["id"], optional: ["version"] },
  ContextMenu: { required: ["id", "actionId"], optional: ["version"] },
  RestoreElement: { required: ["id", "state"], optional: ["version"] },
};

const MESSAGE_REQUIRED = ["protocol", "messageId", "graphModelId", "kind"];
const MESSAGE_OPTIONAL = ["userId", "commands", "snapshot", "modelVersion"];

function isPlainObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function checkFields(obj: Record<string, unknown>, spec: FieldSpec, what: string): void {
  for (const key of spec.required) {
    if (!(key in obj)) {
      throw new DecodeError(`${what}: missing field ${JSON.stringify(key)}`);
    }
  }
  const allowed = new Set([...spec.required, ...spec.optional, "type"]);
  for (const key of Object.keys(obj)) {
    if (!allowed.has(key)) {
      throw new DecodeError(`${what}: unknown field ${JSON.stringify(key)}`);
    }
  }
}

export function validateCommand(raw: unknown): Command {
  if (!isPlainObject(raw)) {
    throw new DecodeError("command must be an object");
  }
  const type = raw["type"];
  if (typeof type !== "string" || !(type in COMMAND_FIELDS)) {
    throw new DecodeError(`unknown command type ${JSON.stringify(type)}`);
  }
  checkFields(raw, COMMAND_FIELDS[type], type);
  return raw as unknown as Command;
}

export function validateMessage(raw: unknown): Message {
  if (!isPlainObject(raw)) {
    throw new DecodeError("message must be an object");
  }
  checkFields(
    raw,
    { required: MESSAGE_REQUIRED, optional: MESSAGE_OPTIONAL },
    "message",
  );
  if (raw["protocol"] !== PROTOCOL_VERSION) {
    throw new DecodeError(`unsupported protocol ${JSON.stringify(raw["protocol"])}`);
  }
  const kind = raw["kind"];
  if (typeof kind !== "string" || !MESSAGE_KINDS.has(kind)) {
    throw new DecodeError(`unknown message kind ${JSON.stringify(kind)}`);
  }
  const commands = raw["commands"];
  if (commands !== undefined) {
    if (!Array.isArray(commands)) {
      throw new DecodeError("commands must be an array");
    }
    for (const c of commands) {
      validateCommand(c);
    }
  }
  return raw as unknown as Message;
}

/** Recursively sort object keys and escape non-ASCII, matching the server. */
export function canonicalJson(value: unknown): string {
  const json = JSON.stringify(sortValue(value));
  return json.replace(/[\u0080-\uffff]/g, (ch) => {
    return "\\u" + ch.charCodeAt(0).toString(16).padStart(4, "0");
  });
}

function sortValue(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortValue);
  }
  if (isPlainObject(value)) {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value).sort()) {
      const v = value[key];
      if (v !== undefined) {
        out[key] = sortValue(v);
      }
    }
    return out;
  }
  return value;
}

/** Strip the fields the canonical encoding omits when they are null. */
function wireDict(msg: Message): Record<string, unknown> {
  const out: Record<string, unknown> = { protocol: PROTOCOL_VERSION };
  out["messageId"] = msg.messageId;
  out["graphModelId"] = msg.graphModelId;
  out["kind"] = msg.kind;
  if (msg.userId !== undefined && msg.userId !== null) {
    out["userId"] = msg.userId;
  }
  if (msg.commands !== undefined) {
    out["commands"] = msg.commands.map((c) => {
      const cmd: Record<string, unknown> = {};
      for (const [k, v] of Object.entries(c)) {
        if (k === "version" && (v === undefined || v === null)) continue;
        cmd[k] = v;
      }
      return cmd;
    });
  }
  if (msg.snapshot !== undefined && msg.snapshot !== null) {
    out["snapshot"] = msg.snapshot;
  }
  if (msg.modelVersion !== undefined && msg.modelVersion !== null) {
    out["modelVersion"] = msg.modelVersion;
  }
  return out;
}

/** Canonical JSON body (websocket payload). */
export function encodeBody(msg: Message): string {
  validateMessage({ ...wireDict(msg) });
  return canonicalJson(wireDict(msg));
}

/** Full frame with the byte-length header (raw stream transports). */
export function encodeFrame(msg: Message): string {
  const body = encodeBody(msg);
  return `${byteLength(body)}\n${body}`;
}

export function decodeBody(text: string): Message {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new DecodeError(`invalid JSON: ${(err as Error).message}`);
  }
  return validateMessage(raw);
}

export function decodeFrame(frame: string): Message {
  const sep = frame.indexOf("\n");
  if (sep < 0) {
    throw new DecodeError("missing length header");
  }
  const header = frame.slice(0, sep);
  const body = frame.slice(sep + 1);
  if (!/^\d+$/.test(header)) {
    throw new DecodeError(`bad length header ${JSON.stringify(header)}`);
  }
  if (Number(header) !== byteLength(body)) {
    throw new DecodeError(
      `length header ${header} does not match body length ${byteLength(body)}`,
    );
  }
  return decodeBody(body);
}

function byteLength(text: string): number {
  return new TextEncoder().encode(text).length;
}

let idCounter = 0;

export function newId(): string {
  idCounter += 1;
  const rand = Math.floor(Math.random() * 0xffffffff).toString(16).padStart(8, "0");
  const time = Date.now().toString(16).padStart(12, "0");
  const seq = idCounter.toString(16).padStart(4, "0");
  return (time + rand + seq + "0".repeat(8)).slice(0, 32);
}

export function editMessage(
  graphModelId: string,
  userId: string,
  commands: Command[],
  kind: MessageKind = "edit",
): Message {
  return { protocol: PROTOCOL_VERSION, messageId: newId(), graphModelId, userId, kind, commands };
}

/** Every element id a message touches (endpoints of edges included). */
export function affectedElements(msg: Message): Set<string> {
  const out = new Set<string>();
  for (const cmd of msg.commands ?? []) {
    const c = cmd as unknown as Record<string, unknown>;
    for (const key of ["id", "containerId", "fromContainerId", "toContainerId",
      "sourceId", "targetId", "oldSource", "oldTarget", "newSource", "newTarget"]) {
      const v = c[key];
      if (typeof v === "string") out.add(v);
    }
    const oldState = c["oldState"];
    if (isPlainObject(oldState)) {
      for (const key of ["sourceId", "targetId", "containerId"]) {
        const v = oldState[key];
        if (typeof v === "string") out.add(v);
      }
    }
  }
  return out;
}
