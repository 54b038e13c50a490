# leading comment

x = 10  # trailing

# between
y = x // 3
print(x, y)
