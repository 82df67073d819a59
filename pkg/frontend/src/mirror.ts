/**
 * Optimistic mirror over the websocket protocol.
 *
 * Local edits apply to the replica immediately and stay pending until the
 * server echoes them (commit) or reverts them (write repair). Inbound
 * server traffic always wins: foreign edits touching elements that pending
 * local messages also touch cause those pendings to be discarded — the
 * server will reject them and the revert restores authoritative state.
 */

import { Replica, Snapshot, containerTypeNames } from "./model.js";
import {
  affectedElements,
  Command,
  editMessage,
  Message,
  newId,
  PROTOCOL_VERSION,
} from "./protocol.js";

export interface Transport {
  send(body: Message): void;
}

export interface EditReport {
  kind: "init" | "self-echo" | "foreign" | "revert";
  discardedPending: string[];
}

export const MAX_PENDING = 32;

export class Mirror {
  readonly userId: string;
  replica: Replica | null = null;
  pending: Message[] = [];
  /** messageIds discarded locally whose echo/revert has not yet arrived. */
  awaitingRepair = new Set<string>();
  private containerTypes: string[];
  private transport: Transport | null;
  onChange: (() => void) | null = null;

  constructor(meta: Record<string, unknown>, userId: string, transport: Transport | null = null) {
    this.userId = userId;
    this.transport = transport;
    this.containerTypes = containerTypeNames(meta);
  }

  get connected(): boolean {
    return this.replica !== null;
  }

  localEdit(commands: Command[]): Message {
    if (!this.replica) {
      throw new Error("not connected");
    }
    if (this.pending.length >= MAX_PENDING) {
      throw new Error("too many unconfirmed messages in flight");
    }
    for (const cmd of commands) {
      this.replica.apply(cmd);
    }
    const msg = editMessage(this.replica.id, this.userId, commands);
    this.pending.push(msg);
    this.transport?.send(msg);
    this.onChange?.();
    return msg;
  }

  localInteraction(command: Command): Message {
    if (!this.replica) {
      throw new Error("not connected");
    }
    const msg = editMessage(this.replica.id, this.userId, [command], "interaction");
    this.transport?.send(msg);
    return msg;
  }

  requestInit(modelId: string): void {
    this.transport?.send({
      protocol: PROTOCOL_VERSION,
      messageId: newId(),
      graphModelId: modelId,
      userId: this.userId,
      kind: "initRequest",
    });
  }

  onServerMessage(msg: Message): EditReport {
    switch (msg.kind) {
      case "init": {
        this.replica = new Replica(msg.snapshot as unknown as Snapshot, this.containerTypes);
        this.pending = [];
        this.awaitingRepair.clear();
        this.onChange?.();
        return { kind: "init", discardedPending: [] };
      }
      case "edit":
        return this.onEdit(msg);
      case "revert":
        return this.onRevert(msg);
      default:
        throw new Error(`unexpected server message kind ${msg.kind}`);
    }
  }

  private pendingIndex(messageId: string): number {
    return this.pending.findIndex((m) => m.messageId === messageId);
  }

  private onEdit(msg: Message): EditReport {
    if (!this.replica) throw new Error("edit before init");
    const idx = this.pendingIndex(msg.messageId);
    if (idx >= 0) {
      // self-echo: re-apply everything absolutely; the broadcast may carry
      // server stamps and hook-appended commands the optimistic apply lacked
      this.pending.splice(idx, 1);
      for (const cmd of msg.commands ?? []) {
        this.replica.apply(cmd);
      }
      if (msg.modelVersion !== undefined) this.replica.modelVersion = msg.modelVersion;
      this.onChange?.();
      return { kind: "self-echo", discardedPending: [] };
    }
    // foreign edit (or the echo of a message this mirror already discarded)
    this.awaitingRepair.delete(msg.messageId);
    const touched = affectedElements(msg);
    const discarded: string[] = [];
    const keep: Message[] = [];
    for (const pendingMsg of this.pending) {
      const overlap = [...affectedElements(pendingMsg)].some((id) => touched.has(id));
      if (overlap) {
        discarded.push(pendingMsg.messageId);
        this.awaitingRepair.add(pendingMsg.messageId);
      } else {
        keep.push(pendingMsg);
      }
    }
    this.pending = keep;
    for (const cmd of msg.commands ?? []) {
      this.replica.apply(cmd);
    }
    if (msg.modelVersion !== undefined) this.replica.modelVersion = msg.modelVersion;
    this.onChange?.();
    return { kind: "foreign", discardedPending: discarded };
  }

  private onRevert(msg: Message): EditReport {
    if (!this.replica) throw new Error("revert before init");
    const idx = this.pendingIndex(msg.messageId);
    if (idx >= 0) this.pending.splice(idx, 1);
    this.awaitingRepair.delete(msg.messageId);
    for (const cmd of msg.commands ?? []) {
      if (cmd.type === "RestoreElement") {
        this.replica.restore(cmd);
      }
    }
    if (msg.modelVersion !== undefined) this.replica.modelVersion = msg.modelVersion;
    this.onChange?.();
    return { kind: "revert", discardedPending: [] };
  }
}
