import { beforeEach, describe, expect, it } from "vitest";

import { Snapshot } from "../src/model.js";
import { MAX_PENDING, Mirror, Transport } from "../src/mirror.js";
import { Message } from "../src/protocol.js";

const META = {
  nodes: [{ name: "Task" }, { name: "Start" }],
  containers: [{ name: "Swimlane" }],
  edges: [{ name: "Flow" }],
};

function snapshot(): Snapshot {
  return {
    id: "m1",
    typeName: "Flowchart",
    attributes: {},
    rootChildren: ["lane", "n2"],
    modelVersion: 3,
    routing: { algorithm: "direct", connectorKind: "line" },
    elements: [
      {
        meta: "container", id: "lane", typeName: "Swimlane", attributes: { label: ["L"] },
        version: 1, x: 0, y: 0, width: 400, height: 300, containerId: "m1", children: ["n1"],
      },
      {
        meta: "node", id: "n1", typeName: "Task", attributes: { label: ["a"] },
        version: 1, x: 10, y: 10, width: 80, height: 40, containerId: "lane",
      },
      {
        meta: "node", id: "n2", typeName: "Task", attributes: { label: ["b"] },
        version: 1, x: 200, y: 10, width: 80, height: 40, containerId: "m1",
      },
      {
        meta: "edge", id: "e1", typeName: "Flow", attributes: {},
        version: 1, sourceId: "n1", targetId: "n2", bendPoints: [],
      },
    ],
  };
}

function initMessage(): Message {
  return {
    protocol: 1,
    messageId: "init-1",
    graphModelId: "m1",
    kind: "init",
    snapshot: snapshot() as unknown as Record<string, unknown>,
  };
}

class FakeTransport implements Transport {
  sent: Message[] = [];
  send(msg: Message): void {
    this.sent.push(msg);
  }
}

describe("mirror lifecycle", () => {
  let transport: FakeTransport;
  let mirror: Mirror;

  beforeEach(() => {
    transport = new FakeTransport();
    mirror = new Mirror(META, "alice", transport);
    mirror.onServerMessage(initMessage());
  });

  it("builds the replica from the init snapshot", () => {
    expect(mirror.connected).toBe(true);
    expect(mirror.replica!.elements.size).toBe(4);
    expect(mirror.replica!.elements.get("lane")!.children).toEqual(["n1"]);
    expect(mirror.replica!.modelVersion).toBe(3);
  });

  it("refuses edits before init", () => {
    const cold = new Mirror(META, "bob", transport);
    expect(() =>
      cold.localEdit([{ type: "ResizeNode", id: "n1", oldSize: [80, 40], newSize: [90, 50] }]),
    ).toThrow(/not connected/);
  });

  it("applies local edits optimistically and sends them", () => {
    const msg = mirror.localEdit([
      { type: "MoveNode", id: "n2", fromContainerId: "m1", toContainerId: "m1",
        from: [200, 10], to: [250, 60] },
    ]);
    expect(mirror.replica!.elements.get("n2")!.x).toBe(250);
    expect(mirror.pending.map((m) => m.messageId)).toEqual([msg.messageId]);
    expect(transport.sent).toEqual([msg]);
  });

  it("commits on self-echo and adopts server stamps", () => {
    const msg = mirror.localEdit([
      { type: "ResizeNode", id: "n1", oldSize: [80, 40], newSize: [120, 60] },
    ]);
    const echo: Message = {
      ...msg,
      commands: [
        { type: "ResizeNode", id: "n1", oldSize: [80, 40], newSize: [120, 60], version: 2 },
      ],
      modelVersion: 4,
    };
    const report = mirror.onServerMessage(echo);
    expect(report.kind).toBe("self-echo");
    expect(mirror.pending).toEqual([]);
    const n1 = mirror.replica!.elements.get("n1")!;
    expect(n1.width).toBe(120);
    expect(n1.version).toBe(2);
    expect(mirror.replica!.modelVersion).toBe(4);
  });

  it("applies hook-appended commands arriving with the echo", () => {
    const msg = mirror.localEdit([
      { type: "MoveNode", id: "n2", fromContainerId: "m1", toContainerId: "m1",
        from: [200, 10], to: [33, 44] },
    ]);
    const echo: Message = {
      ...msg,
      commands: [
        ...(msg.commands ?? []),
        { type: "ResizeNode", id: "n2", oldSize: [80, 40], newSize: [64, 32] },
      ],
    };
    mirror.onServerMessage(echo);
    const n2 = mirror.replica!.elements.get("n2")!;
    expect([n2.x, n2.y, n2.width, n2.height]).toEqual([33, 44, 64, 32]);
  });

  it("discards conflicting pendings when a foreign edit lands", () => {
    const mine = mirror.localEdit([
      { type: "MoveNode", id: "n2", fromContainerId: "m1", toContainerId: "m1",
        from: [200, 10], to: [1, 1] },
    ]);
    const unrelated = mirror.localEdit([
      { type: "SetAttributes", id: "n1", oldAssignment: { label: ["a"] },
        newAssignment: { label: ["x"] } },
    ]);
    const foreign: Message = {
      protocol: 1, messageId: "f1", graphModelId: "m1", userId: "bob", kind: "edit",
      commands: [
        { type: "MoveNode", id: "n2", fromContainerId: "m1", toContainerId: "m1",
          from: [200, 10], to: [90, 90], version: 2 },
      ],
      modelVersion: 5,
    };
    const report = mirror.onServerMessage(foreign);
    expect(report.kind).toBe("foreign");
    expect(report.discardedPending).toEqual([mine.messageId]);
    expect(mirror.awaitingRepair.has(mine.messageId)).toBe(true);
    expect(mirror.pending.map((m) => m.messageId)).toEqual([unrelated.messageId]);
    // the foreign edit wins over the optimistic one
    expect(mirror.replica!.elements.get("n2")!.x).toBe(90);
  });

  it("repairs via RestoreElement on revert", () => {
    const mine = mirror.localEdit([
      { type: "MoveNode", id: "n2", fromContainerId: "m1", toContainerId: "m1",
        from: [200, 10], to: [7, 7] },
    ]);
    const revert: Message = {
      protocol: 1, messageId: mine.messageId, graphModelId: "m1", kind: "revert",
      commands: [
        {
          type: "RestoreElement", id: "n2",
          state: {
            meta: "node", id: "n2", typeName: "Task", attributes: { label: ["b"] },
            version: 2, x: 90, y: 90, width: 80, height: 40, containerId: "m1",
          },
        },
      ],
      modelVersion: 5,
    };
    const report = mirror.onServerMessage(revert);
    expect(report.kind).toBe("revert");
    expect(mirror.pending).toEqual([]);
    expect(mirror.awaitingRepair.size).toBe(0);
    const n2 = mirror.replica!.elements.get("n2")!;
    expect([n2.x, n2.y, n2.version]).toEqual([90, 90, 2]);
    expect(mirror.replica!.rootChildren).toContain("n2");
  });

  it("removes elements restored to null", () => {
    const revert: Message = {
      protocol: 1, messageId: "r1", graphModelId: "m1", kind: "revert",
      commands: [{ type: "RestoreElement", id: "n1", state: null }],
    };
    mirror.onServerMessage(revert);
    expect(mirror.replica!.elements.has("n1")).toBe(false);
    expect(mirror.replica!.elements.get("lane")!.children).toEqual([]);
  });

  it("bounds the pending window", () => {
    for (let i = 0; i < MAX_PENDING; i++) {
      mirror.localEdit([
        { type: "SetAttributes", id: "n1", oldAssignment: {}, newAssignment: { label: [i] } },
      ]);
    }
    expect(() =>
      mirror.localEdit([
        { type: "SetAttributes", id: "n1", oldAssignment: {}, newAssignment: { label: ["x"] } },
      ]),
    ).toThrow(/unconfirmed/);
  });

  it("resets everything on a fresh init", () => {
    mirror.localEdit([
      { type: "ResizeNode", id: "n1", oldSize: [80, 40], newSize: [99, 99] },
    ]);
    mirror.onServerMessage(initMessage());
    expect(mirror.pending).toEqual([]);
    expect(mirror.replica!.elements.get("n1")!.width).toBe(80);
  });

  it("moves containers rigidly with their children", () => {
    mirror.localEdit([
      { type: "MoveNode", id: "lane", fromContainerId: "m1", toContainerId: "m1",
        from: [0, 0], to: [100, 50] },
    ]);
    const n1 = mirror.replica!.elements.get("n1")!;
    expect([n1.x, n1.y]).toEqual([110, 60]);
  });

  it("sends interactions without touching the replica or pending", () => {
    const before = mirror.replica!.elements.get("n1")!.version;
    const msg = mirror.localInteraction({ type: "DoubleClick", id: "n1" });
    expect(msg.kind).toBe("interaction");
    expect(mirror.pending).toEqual([]);
    expect(mirror.replica!.elements.get("n1")!.version).toBe(before);
    expect(transport.sent.at(-1)).toBe(msg);
  });

  it("sends an initRequest when asked to resync", () => {
    mirror.requestInit("m1");
    const sent = transport.sent.at(-1)!;
    expect(sent.kind).toBe("initRequest");
    expect(sent.graphModelId).toBe("m1");
  });
});
