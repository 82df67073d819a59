export * from "./protocol.js";
export * from "./model.js";
export * from "./mirror.js";
export * from "./render.js";
export { connect, WsTransport } from "./connection.js";
export { startApp } from "./app.js";
