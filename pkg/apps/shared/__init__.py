# Shared app for reusable components
